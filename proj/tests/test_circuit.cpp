// Copyright 2026 The qdiff Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "oracles.hpp"
#include "qdiff/circuit.hpp"
#include "qdiff/parallel.hpp"

using namespace qdiff;
using namespace qdiff::circuit;
using std::numbers::pi;

namespace {

ComplexMatrix two_qubit_generator(double a, double b, double g) {
  const auto xx = tensor_product(pauli::X(), pauli::X());
  const auto yy = tensor_product(pauli::Y(), pauli::Y());
  const auto zz = tensor_product(pauli::Z(), pauli::Z());
  return xx * cplx(a) + yy * cplx(b) + zz * cplx(g);
}

// |Tr(U^dagger V)| / dim.
double phase_fidelity(const ComplexMatrix& u, const ComplexMatrix& v) {
  return std::abs(testing::matmul(u.adjoint(), v).trace()) / static_cast<double>(u.rows());
}

double block_fidelity(double a, double b, double g) {
  ParamCircuit c(2, 3);
  c.add(vw_block(0, 1, {0, 1, 2}));
  const std::vector<double> p{a, b, g};
  return phase_fidelity(circuit_unitary(c, p), expm_hermitian(two_qubit_generator(a, b, g), -1.0));
}

}  // namespace

TEST_CASE("apply_gate") {
  const double r = 1 / std::sqrt(2.0);
  const auto h0 = apply_gate(StateVector::zero(1), Gate::h(0), {});
  CHECK(testing::max_abs_diff(h0.amps(), ComplexVec{r, r}) < 1e-15);

  const auto c = apply_gate(StateVector::basis(2, 2), Gate::cnot(0, 1), {});
  CHECK(std::abs(c[3] - 1.0) == 0.0);

  auto rng = substream(21);
  std::uniform_real_distribution<double> u(-2 * pi, 2 * pi);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> p{u(rng)};
    const auto s = apply_gate(StateVector::zero(1), Gate::param(GateKind::RY, 0, 0), p);
    CHECK(testing::max_abs_diff(s.amps(), ComplexVec{std::cos(p[0] / 2), std::sin(p[0] / 2)}) < 1e-15);
  }

  SUBCASE("gate conventions") {
    const std::vector<double> th{0.7};
    const auto rz = apply_gate(StateVector::from_amplitudes({r, r}), Gate::param(GateKind::RZ, 0, 0), th);
    CHECK(std::abs(rz[0] - r * std::exp(cplx(0, -0.35))) < 1e-15);
    CHECK(std::abs(rz[1] - r * std::exp(cplx(0, 0.35))) < 1e-15);
    const auto ph = apply_gate(StateVector::basis(1, 1), Gate::param(GateKind::Phase, 0, 0), th);
    CHECK(std::abs(ph[1] - std::exp(cplx(0, 0.7))) < 1e-15);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(apply_gate(StateVector::zero(1), Gate::param(GateKind::RX, 0, 3), std::vector<double>{1.0}),
                    std::out_of_range);
    CHECK_THROWS_AS(apply_gate(StateVector::zero(2), Gate::cnot(1, 1), {}), std::invalid_argument);
    CHECK_THROWS_AS(apply_gate(StateVector::zero(2), Gate::h(2), {}), std::invalid_argument);
  }
  SUBCASE("norm preserved") {
    for (int trial = 0; trial < 50; ++trial) {
      const auto psi = testing::random_state(3, rng);
      const auto c3 = testing::random_circuit(3, 1, rng);
      const auto p = testing::random_params(c3.n_params(), rng);
      const auto out = apply_gate(psi, c3.gates()[0], p);
      CHECK(std::abs(norm_squared(out.amps()) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("Gate validation") {
  ParamCircuit c(2, 1);
  Gate both = Gate::param(GateKind::RX, 0, 0);
  both.fixed_angle = 1.0;
  CHECK_THROWS_AS(c.add(both), std::invalid_argument);
  Gate neither = Gate::of(GateKind::RY, {0});
  CHECK_THROWS_AS(c.add(neither), std::invalid_argument);
  Gate h_with_angle = Gate::h(0);
  h_with_angle.fixed_angle = 0.1;
  CHECK_THROWS_AS(c.add(h_with_angle), std::invalid_argument);
  CHECK_THROWS_AS(c.add(Gate::param(GateKind::RX, 0, 1)), std::invalid_argument);
}

TEST_CASE("run_circuit") {
  auto rng = substream(22);
  SUBCASE("empty circuit is the identity") {
    const auto psi = testing::random_state(3, rng);
    const auto out = run_circuit(ParamCircuit(3, 0), psi, {});
    CHECK(testing::max_abs_diff(out.amps(), psi.amps()) == 0.0);
  }
  SUBCASE("H H restores the input") {
    ParamCircuit c(2, 0);
    c.add(Gate::h(0)).add(Gate::h(0));
    const auto psi = testing::random_state(2, rng);
    CHECK(testing::max_abs_diff(run_circuit(c, psi, {}).amps(), psi.amps()) < 1e-12);
  }
  SUBCASE("matches the gate-by-gate dense oracle") {
    for (int n = 1; n <= 6; ++n) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto c = testing::random_circuit(n, 25, rng);
        const auto p = testing::random_params(c.n_params(), rng);
        const auto psi = testing::random_state(n, rng);
        const auto dense = matvec(testing::dense_circuit(c, p), psi.amps());
        const auto out = run_circuit(c, psi, p);
        CHECK(testing::max_abs_diff(out.amps(), dense) < 1e-10);
        CHECK(testing::max_abs_diff(out.amps(), matvec(circuit_unitary(c, p), psi.amps())) < 1e-10);
        CHECK(std::abs(std::sqrt(norm_squared(out.amps())) - 1.0) < 1e-10);
      }
    }
  }
  SUBCASE("dimension errors") {
    ParamCircuit c(2, 1);
    CHECK_THROWS_AS(run_circuit(c, StateVector::zero(3), std::vector<double>{0.0}), std::invalid_argument);
    CHECK_THROWS_AS(run_circuit(c, StateVector::zero(2), {}), std::invalid_argument);
  }
  SUBCASE("controlled unitary acts only on the control-1 half") {
    const auto u = testing::ry(0.9);
    ParamCircuit c(2, 0);
    c.add(Gate::controlled(0, {1}, u));
    const auto psi = testing::random_state(2, rng);
    ComplexMatrix cu = ComplexMatrix::identity(4);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) cu(2 + i, 2 + j) = u(i, j);
    CHECK(testing::max_abs_diff(run_circuit(c, psi, {}).amps(), matvec(cu, psi.amps())) < 1e-15);
  }
}

TEST_CASE("circuit_unitary") {
  CHECK(circuit_unitary(ParamCircuit(3, 0), {}).max_abs_diff(ComplexMatrix::identity(8)) == 0.0);

  ParamCircuit cn(2, 0);
  cn.add(Gate::cnot(0, 1));
  const ComplexMatrix perm(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0});
  CHECK(circuit_unitary(cn, {}).max_abs_diff(perm) == 0.0);

  auto rng = substream(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5;
    const auto c = testing::random_circuit(n, 20, rng);
    const auto p = testing::random_params(c.n_params(), rng);
    const auto u = circuit_unitary(c, p);
    CHECK((testing::matmul(u.adjoint(), u) - ComplexMatrix::identity(u.rows())).frobenius_norm() < 1e-10);
    if (trial % 10 == 0) {
      for (std::size_t j = 0; j < u.cols(); ++j) {
        const auto col = run_circuit(c, StateVector::basis(n, j), p);
        for (std::size_t i = 0; i < u.rows(); ++i) CHECK(std::abs(u(i, j) - col[i]) < 1e-12);
      }
    }
  }
  ParamCircuit big(11, 0);
  CHECK_THROWS_AS(circuit_unitary(big, {}), std::invalid_argument);
}

TEST_CASE("vw_block") {
  const auto gates = vw_block(0, 1, {0, 1, 2});
  CHECK(gates.size() == 8);
  int cnots = 0;
  for (const auto& g : gates) cnots += g.kind == GateKind::CNOT;
  CHECK(cnots == 3);
  CHECK(gates[1].targets == std::vector<int>{1, 0});
  CHECK(gates[4].targets == std::vector<int>{0, 1});
  CHECK(gates[6].targets == std::vector<int>{1, 0});

  CHECK(block_fidelity(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(block_fidelity(pi / 4, pi / 4, pi / 4) == doctest::Approx(1.0).epsilon(1e-10));

  auto rng = substream(24);
  double worst = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = testing::random_params(3, rng);
    worst = std::min(worst, block_fidelity(p[0], p[1], p[2]));
  }
  CHECK(worst > 1 - 1e-9);

  SUBCASE("block placed on reversed and distant wires") {
    const auto p = testing::random_params(3, rng);
    ParamCircuit c(3, 3);
    c.add(vw_block(2, 0, {0, 1, 2}));
    // exp(-i(...)) on qubits {0, 2} is symmetric under exchange; embed it with a dense oracle.
    const auto v = expm_hermitian(two_qubit_generator(p[0], p[1], p[2]), -1.0);
    ComplexMatrix full(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        const std::size_t mi = (i >> 1 & 1), mj = (j >> 1 & 1);
        if (mi != mj) continue;
        const std::size_t li = (i >> 2 & 1) * 2 + (i & 1), lj = (j >> 2 & 1) * 2 + (j & 1);
        full(i, j) = v(li, lj);
      }
    CHECK(phase_fidelity(circuit_unitary(c, p), full) > 1 - 1e-9);
  }
  CHECK_THROWS_AS(vw_block(1, 1, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("mixing_layer") {
  SUBCASE("n=2 at zero angles builds the two-qubit cluster state") {
    ParamCircuit c(2, 2);
    const std::vector<std::size_t> refs{0, 1};
    c.add(mixing_layer(2, refs));
    const auto out = run_circuit(c, StateVector::zero(2), std::vector<double>{0.0, 0.0});
    CHECK(testing::max_abs_diff(out.amps(), ComplexVec{0.5, 0.5, 0.5, -0.5}) < 1e-15);
  }
  SUBCASE("n=3 matches (x)RX * CZ12 * CZ01 * H(x)H(x)H") {
    auto rng = substream(25);
    ParamCircuit c(3, 3);
    const std::vector<std::size_t> refs{0, 1, 2};
    c.add(mixing_layer(3, refs));
    for (int trial = 0; trial < 10; ++trial) {
      const auto p = testing::random_params(3, rng);
      const auto h3 = testing::kron(testing::kron(testing::hadamard(), testing::hadamard()), testing::hadamard());
      const auto rxs = testing::kron(testing::kron(testing::rx(p[0]), testing::rx(p[1])), testing::rx(p[2]));
      const auto u = testing::matmul(rxs, testing::matmul(testing::dense_cz(1, 2, 3), testing::matmul(testing::dense_cz(0, 1, 3), h3)));
      const auto psi = testing::random_state(3, rng);
      CHECK(testing::max_abs_diff(run_circuit(c, psi, p).amps(), matvec(u, psi.amps())) < 1e-12);
    }
  }
  const std::vector<std::size_t> one{0};
  CHECK_THROWS_AS(mixing_layer(1, one), std::invalid_argument);
}

TEST_CASE("build_ansatz") {
  const auto a21 = build_ansatz(2, 1);
  CHECK(a21.n_params() == 5);
  CHECK(a21.size() == 13);
  CHECK(build_ansatz(4, 1).n_params() == 13);
  CHECK(build_ansatz(4, 2).n_params() == 26);
  CHECK(brick_pairs(4) == std::vector<std::array<int, 2>>{{0, 1}, {2, 3}, {1, 2}});
  for (int n = 2; n <= 6; ++n)
    for (int l = 1; l <= 4; ++l) {
      const auto c = build_ansatz(n, l);
      const std::size_t pairs = static_cast<std::size_t>(n - 1);  // brick offsets together cover every neighbour
      CHECK(c.n_params() == static_cast<std::size_t>(l) * (3 * pairs + n));
      CHECK(c.n_params() == ansatz_param_count(n, l));
    }
  CHECK_THROWS_AS(build_ansatz(1, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_ansatz(3, 0), std::invalid_argument);
}

TEST_CASE("dump matches the golden file") {
  std::ifstream in(std::string(QDIFF_TEST_DATA_DIR) + "/golden/ansatz_n2_l1.txt");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(dump(build_ansatz(2, 1)) == ss.str());
}

TEST_CASE("concurrent simulation") {
  const auto c = build_ansatz(4, 2);
  auto rng = substream(26);
  std::vector<std::vector<double>> params;
  for (int i = 0; i < 16; ++i) params.push_back(testing::random_params(c.n_params(), rng));
  std::vector<ComplexVec> serial(16), threaded(16);
  for (int i = 0; i < 16; ++i) serial[i] = run_circuit(c, StateVector::zero(4), params[i]).vec();
  parallel_for(16, 4, [&](std::size_t i) { threaded[i] = run_circuit(c, StateVector::zero(4), params[i]).vec(); });
  for (int i = 0; i < 16; ++i) CHECK(testing::max_abs_diff(serial[i], threaded[i]) == 0.0);
}
