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
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "qdiff/qcore.hpp"

using namespace qdiff;
using qdiff::testing::random_state;

namespace {

StateVector bell() {
  const double r = 1 / std::sqrt(2.0);
  return StateVector::from_amplitudes({r, 0.0, 0.0, r});
}

double max_entry(const ComplexMatrix& m) {
  double v = 0.0;
  for (const auto& z : m.data()) v = std::max(v, std::abs(z));
  return v;
}

}  // namespace

TEST_CASE("tensor_product") {
  SUBCASE("identity") {
    CHECK(tensor_product(pauli::I(), pauli::I()).max_abs_diff(ComplexMatrix::identity(4)) == 0.0);
  }
  SUBCASE("X (x) X flips |00> to |11>") {
    const auto xx = tensor_product(pauli::X(), pauli::X());
    const auto out = matvec(xx, StateVector::zero(2).amps());
    CHECK(std::abs(out[3] - 1.0) == 0.0);
    CHECK(std::abs(out[0]) == 0.0);
  }
  SUBCASE("matches index-formula oracle on random pairs") {
    auto rng = substream(1);
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = testing::random_matrix(2, 2, rng), b = testing::random_matrix(2, 3, rng);
      CHECK(tensor_product(a, b).max_abs_diff(testing::kron(a, b)) == 0.0);
    }
  }
}

TEST_CASE("outer_product") {
  const auto r0 = outer_product(StateVector::zero(1));
  CHECK(r0.mat().max_abs_diff(ComplexMatrix::diagonal(std::vector<cplx>{1.0, 0.0})) == 0.0);

  const double r = 1 / std::sqrt(2.0);
  const auto plus = outer_product(StateVector::from_amplitudes({r, r}));
  for (const auto& z : plus.mat().data()) CHECK(std::abs(z - 0.5) < 1e-15);

  auto rng = substream(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rho = outer_product(random_state(2, rng));
    CHECK(std::abs(rho.mat().trace() - 1.0) < 1e-12);
    CHECK(std::abs(purity(rho) - 1.0) < 1e-12);
    CHECK(rho.mat().is_hermitian(1e-14));
  }
}

TEST_CASE("partial_trace") {
  SUBCASE("Bell state reduces to I/2 on either qubit") {
    for (int keep : {0, 1}) {
      const auto red = partial_trace(outer_product(bell()), keep);
      CHECK(red.mat().max_abs_diff(DensityMatrix::maximally_mixed(1).mat()) < 1e-15);
    }
  }
  SUBCASE("|01>, keep qubit 1 -> |1><1|") {
    const auto red = partial_trace(outer_product(StateVector::basis(2, 1)), 1);
    CHECK(red.mat().max_abs_diff(ComplexMatrix::diagonal(std::vector<cplx>{0.0, 1.0})) == 0.0);
    const auto red0 = partial_trace(outer_product(StateVector::basis(2, 1)), 0);
    CHECK(red0.mat().max_abs_diff(ComplexMatrix::diagonal(std::vector<cplx>{1.0, 0.0})) == 0.0);
  }
  SUBCASE("random 3-qubit states match the brute-force sum") {
    auto rng = substream(3);
    for (int trial = 0; trial < 20; ++trial) {
      const auto psi = random_state(3, rng);
      const auto rho = outer_product(psi);
      for (int k = 0; k < 3; ++k) {
        const auto red = partial_trace(rho, k);
        CHECK(red.mat().max_abs_diff(testing::brute_partial_trace(rho.mat(), 3, k)) < 1e-12);
        CHECK(std::abs(red.mat().trace() - 1.0) < 1e-12);
        CHECK(reduced_qubit_state(psi, k).max_abs_diff(red.mat()) < 1e-12);
      }
    }
  }
  SUBCASE("mixed inputs preserve trace") {
    auto rng = substream(4);
    for (int trial = 0; trial < 10; ++trial) {
      const auto rho = DensityMatrix::from_matrix(testing::random_density(3, rng));
      for (int k = 0; k < 3; ++k) CHECK(std::abs(partial_trace(rho, k).mat().trace() - 1.0) < 1e-12);
    }
  }
  SUBCASE("product states give the exact single-qubit projector") {
    auto rng = substream(5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto a = random_state(1, rng), b = random_state(1, rng);
      const auto ab = StateVector::from_amplitudes(
          matvec(tensor_product(ComplexMatrix(2, 1, a.vec()), ComplexMatrix(2, 1, b.vec())), std::vector<cplx>{1.0}));
      CHECK(partial_trace(outer_product(ab), 0).mat().max_abs_diff(outer_product(a).mat()) < 1e-12);
      CHECK(partial_trace(outer_product(ab), 1).mat().max_abs_diff(outer_product(b).mat()) < 1e-12);
    }
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(partial_trace(outer_product(bell()), 2), std::out_of_range);
    CHECK_THROWS_AS(partial_trace(outer_product(bell()), -1), std::out_of_range);
  }
}

TEST_CASE("purity") {
  CHECK(std::abs(purity(outer_product(StateVector::basis(2, 3))) - 1.0) < 1e-12);
  CHECK(std::abs(purity(DensityMatrix::maximally_mixed(1)) - 0.5) < 1e-12);
  const auto d = DensityMatrix::from_matrix(ComplexMatrix::diagonal(std::vector<cplx>{0.75, 0.25}));
  CHECK(std::abs(purity(d) - 0.625) < 1e-12);
}

TEST_CASE("state_fidelity") {
  const auto r0 = outer_product(StateVector::zero(1));
  CHECK(state_fidelity(r0, StateVector::zero(1)) == doctest::Approx(1.0));
  CHECK(state_fidelity(r0, StateVector::basis(1, 1)) == doctest::Approx(0.0));
  CHECK(state_fidelity(DensityMatrix::maximally_mixed(1), StateVector::zero(1)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(state_fidelity(r0, StateVector::zero(2)), std::invalid_argument);
}

TEST_CASE("DensityMatrix validation") {
  CHECK_THROWS_AS(DensityMatrix::from_matrix(ComplexMatrix::identity(2)), std::invalid_argument);  // trace 2
  CHECK_THROWS_AS(DensityMatrix::from_matrix(ComplexMatrix(2, 2, {0.5, 0.1, 0.2, 0.5})), std::invalid_argument);
  CHECK_THROWS_AS(DensityMatrix::from_matrix(ComplexMatrix::diagonal(std::vector<cplx>{1.5, -0.5})),
                  std::invalid_argument);
  CHECK_THROWS_AS(StateVector::from_amplitudes({1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StateVector::from_amplitudes({1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("eigh") {
  auto rng = substream(6);
  for (std::size_t d : {1u, 2u, 5u, 16u, 40u}) {
    auto a = testing::random_matrix(d, d, rng);
    const auto h = (a + a.adjoint()) * cplx(0.5);
    const auto eig = eigh(h);
    // H V = V diag(lambda), V unitary, ascending order.
    const auto hv = testing::matmul(h, eig.vectors);
    auto vd = eig.vectors;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) vd(i, k) *= eig.values[k];
    CHECK(hv.max_abs_diff(vd) < 1e-10);
    CHECK(testing::matmul(eig.vectors.adjoint(), eig.vectors).max_abs_diff(ComplexMatrix::identity(d)) < 1e-10);
    for (std::size_t k = 1; k < d; ++k) CHECK(eig.values[k - 1] <= eig.values[k]);
    double tr = 0.0;
    for (double v : eig.values) tr += v;
    CHECK(std::abs(tr - h.trace().real()) < 1e-9);
  }
}

TEST_CASE("expm_hermitian") {
  using std::numbers::pi;
  SUBCASE("diagonal case") {
    const auto u = expm_hermitian(pauli::Z(), -pi / 2);
    CHECK(u.max_abs_diff(ComplexMatrix::diagonal(std::vector<cplx>{std::exp(cplx(0, -pi / 2)), std::exp(cplx(0, pi / 2))})) < 1e-14);
  }
  SUBCASE("zero generator") { CHECK(expm_hermitian(ComplexMatrix(4, 4), 1.3).max_abs_diff(ComplexMatrix::identity(4)) < 1e-15); }
  SUBCASE("X generator reproduces RX up to global phase") {
    auto rng = substream(7);
    std::uniform_real_distribution<double> u(0, 2 * pi);
    for (int trial = 0; trial < 20; ++trial) {
      const double th = u(rng);
      const auto e = expm_hermitian(pauli::X(), -th / 2);
      const auto overlap = testing::matmul(e.adjoint(), testing::rx(th)).trace();
      CHECK(std::abs(overlap) / 2 == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(e.max_abs_diff(testing::rx(th)) < 1e-12);
    }
  }
  SUBCASE("unitary for random Hermitian generators") {
    auto rng = substream(8);
    for (int trial = 0; trial < 10; ++trial) {
      auto a = testing::random_matrix(8, 8, rng);
      const auto u = expm_hermitian((a + a.adjoint()) * cplx(0.5), 0.7);
      CHECK(max_entry(testing::matmul(u.adjoint(), u) - ComplexMatrix::identity(8)) < 1e-10);
    }
  }
  SUBCASE("rejects non-Hermitian input") {
    CHECK_THROWS_AS(expm_hermitian(ComplexMatrix(2, 2, {0.0, 1.0, 0.0, 0.0}), 1.0), std::invalid_argument);
  }
}

TEST_CASE("sqrtm_psd") {
  CHECK(sqrtm_psd(ComplexMatrix::identity(3)).max_abs_diff(ComplexMatrix::identity(3)) < 1e-14);
  CHECK(sqrtm_psd(ComplexMatrix::diagonal(std::vector<cplx>{4.0, 9.0}))
            .max_abs_diff(ComplexMatrix::diagonal(std::vector<cplx>{2.0, 3.0})) < 1e-14);
  auto rng = substream(9);
  for (std::size_t d : {2u, 6u, 30u}) {
    const auto a = testing::random_matrix(d, d, rng);
    const auto m = testing::matmul(a.adjoint(), a);
    const auto s = sqrtm_psd(m);
    CHECK(testing::matmul(s, s).max_abs_diff(m) < 1e-8);
    CHECK(s.is_hermitian(1e-10));
    for (double v : eigh(s).values) CHECK(v >= -1e-10);
  }
  CHECK_THROWS_AS(sqrtm_psd(ComplexMatrix::diagonal(std::vector<cplx>{1.0, -1e-3})), std::invalid_argument);
  // Tiny negative noise clamps to zero.
  CHECK(sqrtm_psd(ComplexMatrix::diagonal(std::vector<cplx>{1.0, -1e-11}))(1, 1) == cplx(0.0));
}
