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
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "qdiff/measure.hpp"

using namespace qdiff;
using namespace qdiff::measure;
using circuit::Gate;
using circuit::GateKind;
using circuit::ParamCircuit;
using std::numbers::pi;

namespace {

// Z on qubit k of an n-qubit register, as an adaptive observable with M = Z_k.
AdaptiveObservable z_on(int k, int n) { return AdaptiveObservable::from_matrix(testing::embed(pauli::Z(), k, n)); }

GlobalProbe single_gate_probe(int n, Gate g, std::vector<double> params) {
  ParamCircuit c(n, params.size());
  c.add(std::move(g));
  return {c, std::move(params)};
}

}  // namespace

TEST_CASE("hermitize") {
  CHECK(hermitize(AdaptiveObservable::from_matrix(ComplexMatrix::identity(2))).max_abs_diff(ComplexMatrix::identity(2)) == 0.0);
  const auto h = hermitize(AdaptiveObservable::from_matrix(ComplexMatrix(2, 2, {0.0, 1.0, 0.0, 0.0})));
  CHECK(h.max_abs_diff(pauli::X() * cplx(0.5)) == 0.0);

  auto rng = substream(31);
  const auto a = testing::random_matrix(4, 4, rng);
  const auto anti = (a - a.adjoint()) * cplx(0.5);
  CHECK(hermitize(AdaptiveObservable::from_matrix(anti)).frobenius_norm() < 1e-15);

  for (int trial = 0; trial < 10; ++trial) {
    const auto obs = AdaptiveObservable::random(8, rng);
    const auto hk = hermitize(obs);
    CHECK(hk.is_hermitian(1e-15));
    for (double v : obs.m_real) CHECK(std::abs(v) <= 1.0 / 8);
  }
}

TEST_CASE("expectation") {
  auto rng = substream(32);
  const auto psi = testing::random_state(3, rng);
  CHECK(expectation(psi, AdaptiveObservable::from_matrix(ComplexMatrix::identity(8))) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(expectation(StateVector::basis(1, 1), z_on(0, 1)) == doctest::Approx(-1.0));

  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testing::random_state(3, rng);
    const auto obs = AdaptiveObservable::from_matrix(testing::random_matrix(8, 8, rng));
    const auto h = hermitize(obs);
    const double trace_form = testing::matmul(testing::dense_outer(s.amps()), h).trace().real();
    CHECK(std::abs(expectation(s, obs) - trace_form) < 1e-12);
  }
  CHECK_THROWS_AS(expectation(psi, z_on(0, 2)), std::invalid_argument);
}

TEST_CASE("ano_features") {
  auto rng = substream(33);
  const auto psi = testing::random_state(3, rng);
  ObservableBank ident{{AdaptiveObservable::from_matrix(ComplexMatrix::identity(8))}};
  CHECK(ano_features(psi, ident).front() == doctest::Approx(1.0));

  ObservableBank zs;
  for (int k = 0; k < 3; ++k) zs.observables.push_back(z_on(k, 3));
  for (double y : ano_features(StateVector::zero(3), zs)) CHECK(y == doctest::Approx(1.0));

  SUBCASE("K = 2n, features lie inside each spectrum") {
    const auto bank = ObservableBank::random(6, 8, rng);
    const auto y = ano_features(psi, bank);
    REQUIRE(y.size() == 6);
    for (std::size_t k = 0; k < y.size(); ++k) {
      const auto eig = eigh(hermitize(bank.observables[k]));
      CHECK(std::isfinite(y[k]));
      CHECK(y[k] >= eig.values.front() - 1e-12);
      CHECK(y[k] <= eig.values.back() + 1e-12);
    }
  }
  SUBCASE("K is independent of n") {
    for (std::size_t k : {1u, 3u, 12u}) CHECK(ano_features(psi, ObservableBank::random(k, 8, rng)).size() == k);
  }
  SUBCASE("eigenvalue bound on many states") {
    const auto bank = ObservableBank::random(4, 16, rng);
    std::vector<EigenDecomposition> eigs;
    for (const auto& o : bank.observables) eigs.push_back(eigh(hermitize(o)));
    for (int trial = 0; trial < 200; ++trial) {
      const auto y = ano_features(testing::random_state(4, rng), bank);
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(y[k] >= eigs[k].values.front() - 1e-12);
        CHECK(y[k] <= eigs[k].values.back() + 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(ano_features(psi, ObservableBank{}), std::invalid_argument);
  CHECK_THROWS_AS(ano_features(StateVector::zero(2), ident), std::invalid_argument);
}

TEST_CASE("hadamard_test") {
  auto rng = substream(34);
  const auto psi = testing::random_state(3, rng);
  CHECK(hadamard_test(psi, GlobalProbe{ParamCircuit(3, 0), {}}) == doctest::Approx(1.0).epsilon(1e-12));

  const double r = 1 / std::sqrt(2.0);
  const auto plus = StateVector::from_amplitudes({r, r});
  CHECK(std::abs(hadamard_test(plus, single_gate_probe(1, Gate::z(0), {}))) < 1e-15);

  std::uniform_real_distribution<double> u(0, 4 * pi);
  for (int trial = 0; trial < 20; ++trial) {
    const double th = u(rng);
    const auto probe = single_gate_probe(1, Gate::param(GateKind::RZ, 0, 0), {th});
    CHECK(std::abs(hadamard_test(StateVector::zero(1), probe) - std::cos(th / 2)) < 1e-12);
  }

  SUBCASE("simulation equals the direct overlap on random instances") {
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + trial % 4;
      auto c = testing::random_circuit(n, 12, rng);
      GlobalProbe probe{c, testing::random_params(c.n_params(), rng)};
      const auto s = testing::random_state(n, rng);
      const auto direct = inner(s.amps(), matvec(testing::dense_circuit(c, probe.params), s.amps())).real();
      CHECK(std::abs(hadamard_test(s, probe) - direct) < 1e-10);
      CHECK(std::abs(overlap_real(s, probe) - direct) < 1e-10);
      CHECK(std::abs(expectation(s, overlap_operator(probe)) - direct) < 1e-10);
    }
  }
  CHECK_THROWS_AS(hadamard_test(psi, single_gate_probe(2, Gate::h(0), {})), std::invalid_argument);
}

TEST_CASE("grad_features_wrt_observables") {
  const auto g0 = grad_features_wrt_observables(StateVector::zero(1), ObservableBank{{z_on(0, 1)}}).front();
  CHECK(g0.d_real[0] == 1.0);
  CHECK(g0.d_real[3] == 0.0);

  auto rng = substream(35);
  const auto psi = testing::random_state(3, rng);
  auto bank = ObservableBank::random(3, 8, rng);
  const auto grads = grad_features_wrt_observables(psi, bank);
  for (std::size_t i = 0; i < 8; ++i) CHECK(grads[0].d_imag[i * 8 + i] == 0.0);

  const double h = 1e-6;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    for (std::size_t e = 0; e < 64; e += 5) {
      auto f = [&] { return expectation(psi, bank.observables[k]); };
      const double nr = testing::central_diff(f, bank.observables[k].m_real[e], h);
      const double ni = testing::central_diff(f, bank.observables[k].m_imag[e], h);
      CHECK(testing::rel_err(grads[k].d_real[e], nr, 1e-8) < 1e-6);
      CHECK(testing::rel_err(grads[k].d_imag[e], ni, 1e-8) < 1e-6);
    }
  }
}

TEST_CASE("grad_features_wrt_circuit") {
  SUBCASE("single RY with Z measurement") {
    ParamCircuit c(1, 1);
    c.add(Gate::param(GateKind::RY, 0, 0));
    const ObservableBank z{{z_on(0, 1)}};
    std::vector<double> th{0.0};
    CHECK(std::abs(grad_features_wrt_circuit(c, StateVector::zero(1), th, z)[0][0]) < 1e-15);
    th[0] = pi / 2;
    CHECK(grad_features_wrt_circuit(c, StateVector::zero(1), th, z)[0][0] == doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("random 4-qubit ansatz Jacobian vs finite differences") {
    auto rng = substream(36);
    const auto c = circuit::build_ansatz(4, 2);
    auto p = testing::random_params(c.n_params(), rng);
    const auto psi0 = testing::random_state(4, rng);
    const auto bank = ObservableBank::random(4, 16, rng);
    const auto jac = grad_features_wrt_circuit(c, psi0, p, bank);
    REQUIRE(jac.size() == 4);
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t j = 0; j < c.n_params(); ++j) {
        auto f = [&] { return expectation(circuit::run_circuit(c, psi0, p), bank.observables[k]); };
        worst = std::max(worst, testing::rel_err(jac[k][j], testing::central_diff(f, p[j], 1e-5), 1e-8));
      }
    CHECK(worst < 1e-5);
  }
  SUBCASE("shared parameters and Phase gates") {
    auto rng = substream(37);
    ParamCircuit c(2, 2);
    c.add(Gate::h(0)).add(Gate::h(1));
    c.add(Gate::param(GateKind::Phase, 0, 0, 1.7, 0.3));
    c.add(Gate::cnot(0, 1));
    c.add(Gate::param(GateKind::RX, 1, 0, -0.5));
    c.add(Gate::param(GateKind::RY, 0, 1));
    c.add(Gate::param(GateKind::Phase, 1, 1));
    c.add(Gate::h(1));
    auto p = testing::random_params(2, rng);
    const auto bank = ObservableBank::random(2, 4, rng);
    const auto jac = grad_features_wrt_circuit(c, StateVector::zero(2), p, bank);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t j = 0; j < 2; ++j) {
        auto f = [&] { return expectation(circuit::run_circuit(c, StateVector::zero(2), p), bank.observables[k]); };
        CHECK(testing::rel_err(jac[k][j], testing::central_diff(f, p[j], 1e-5), 1e-8) < 1e-5);
      }
  }
  SUBCASE("unsupported parameterized gate") {
    ParamCircuit c(1, 1);
    Gate bad = Gate::h(0);
    c.add(bad);
    // Bypass validation to mimic a foreign gate carrying a parameter.
    auto gates = c.gates();
    gates[0].param_ref = 0;
    ParamCircuit raw(1, 1);
    CHECK_THROWS_AS(raw.add(gates[0]), std::invalid_argument);
  }
}

TEST_CASE("grad_overlap_wrt_probe") {
  auto rng = substream(38);
  for (int trial = 0; trial < 5; ++trial) {
    auto c = circuit::build_ansatz(3, 1);
    c.add(Gate::param(GateKind::Phase, 1, 0, 0.8));
    GlobalProbe probe{c, testing::random_params(c.n_params(), rng)};
    const auto psi = testing::random_state(3, rng);
    const auto g = grad_overlap_wrt_probe(psi, probe);
    for (std::size_t j = 0; j < c.n_params(); ++j) {
      auto f = [&] { return overlap_real(psi, probe); };
      CHECK(testing::rel_err(g[j], testing::central_diff(f, probe.params[j], 1e-5), 1e-8) < 1e-5);
    }
  }
}

TEST_CASE("bank serialization") {
  auto rng = substream(39);
  const auto bank = ObservableBank::random(3, 4, rng);
  const auto path = std::filesystem::temp_directory_path() / "qdiff_bank_test.bin";
  save_bank(bank, path);
  CHECK(std::filesystem::file_size(path) == 16 + 3 * 2 * 16 * 8);
  const auto back = load_bank(path);
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back.observables[k].m_real == bank.observables[k].m_real);
    CHECK(back.observables[k].m_imag == bank.observables[k].m_imag);
  }
  const auto j = bank_from_json(bank_to_json(bank));
  CHECK(j.observables[2].m_imag == bank.observables[2].m_imag);
  std::filesystem::remove(path);
}
