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
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qdiff/bench.hpp"

using namespace qdiff;
using namespace qdiff::bench;
using namespace qdiff::circuit;
using std::numbers::pi;

namespace {

double simpson(auto&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

// Brute-force Meyer-Wallach through dense partial traces.
double mw_oracle(const StateVector& psi) {
  const int n = psi.n_qubits();
  const auto rho = testing::dense_outer(psi.amps());
  double acc = 0;
  for (int k = 0; k < n; ++k) {
    const auto r = testing::brute_partial_trace(rho, n, k);
    double p = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) p += std::norm(r(i, j));
    acc += 0.5 * (1 - p);
  }
  return 4.0 / n * acc;
}

ParamCircuit rotation_only(int n) {
  ParamCircuit c(n, 0);
  for (int q = 0; q < n; ++q) {
    const auto p = c.add_params(3);
    c.add(Gate::param(GateKind::RX, q, p)).add(Gate::param(GateKind::RY, q, p + 1)).add(Gate::param(GateKind::RZ, q, p + 2));
  }
  return c;
}

StateVector w_state() {
  ComplexVec a(8, 0.0);
  a[1] = a[2] = a[4] = 1 / std::sqrt(3.0);
  return StateVector::from_amplitudes(a);
}

std::vector<std::vector<double>> gaussian_set(std::size_t n, std::vector<double> mean, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> out(n, mean);
  for (auto& v : out)
    for (auto& x : v) x += g(rng);
  return out;
}

// 2d points mu +- c_i e_i: sample mean mu, sample covariance exactly diag(2 c_i^2 / (2d - 1)).
std::vector<std::vector<double>> axis_set(const std::vector<double>& mu, const std::vector<double>& c) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (double s : {-1.0, 1.0}) {
      auto v = mu;
      v[i] += s * c[i];
      out.push_back(v);
    }
  return out;
}

}  // namespace

TEST_CASE("haar_pdf") {
  for (double f : {0.0, 0.3, 0.99, 1.0}) CHECK(haar_pdf(f, 2) == 1.0);
  CHECK(haar_pdf(0.0, 4) == 3.0);
  for (std::size_t n : {2u, 4u, 16u}) {
    const double integral = simpson([&](double f) { return haar_pdf(f, n); }, 0.0, 1.0, 20000);
    CHECK(std::abs(integral - 1.0) < 1e-6);
    double total = 0;
    for (int b = 0; b < 75; ++b) {
      const double lo = b / 75.0, hi = (b + 1) / 75.0;
      const double m = haar_bin_mass(lo, hi, n);
      CHECK(std::abs(m - simpson([&](double f) { return haar_pdf(f, n); }, lo, hi, 200)) < 1e-10);
      total += m;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(haar_pdf(1.5, 4), std::invalid_argument);
  CHECK_THROWS_AS(haar_pdf(0.5, 1), std::invalid_argument);
}

TEST_CASE("sample_fidelities") {
  const auto idle = sample_fidelities(ParamCircuit(4, 0), StateVector::zero(4), 100, 1);
  for (double f : idle) CHECK(f == 1.0);

  ParamCircuit zyz(1, 3);
  zyz.add(Gate::param(GateKind::RZ, 0, 0)).add(Gate::param(GateKind::RY, 0, 1)).add(Gate::param(GateKind::RZ, 0, 2));
  const auto fids = sample_fidelities(zyz, StateVector::zero(1), 10000, 2);
  double mean = 0;
  for (double f : fids) {
    CHECK((f >= 0 && f <= 1));
    mean += f / fids.size();
  }
  CHECK(std::abs(mean - 0.5) < 0.02);

  const auto c = build_ansatz(3, 1);
  const auto a = sample_fidelities(c, StateVector::zero(3), 200, 3, 1);
  CHECK(a == sample_fidelities(c, StateVector::zero(3), 200, 3, 1));
  CHECK(a == sample_fidelities(c, StateVector::zero(3), 200, 3, 4));
}

TEST_CASE("expressibility") {
  SUBCASE("idle circuit is a single-bin distribution") {
    const std::vector<double> ones(1000, 1.0);
    const double q_last = std::pow(1.0 / 75.0, 15.0);
    CHECK(expressibility(ones, 16) == doctest::Approx(std::log(1 / q_last)).epsilon(1e-12));
    CHECK(expressibility(ones, 16) > 5);
  }
  SUBCASE("matches a hand-binned KL") {
    auto rng = substream(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> f(3000);
    for (auto& x : f) x = u(rng) * u(rng);
    std::vector<int> counts(75, 0);
    for (double x : f) {
      int b = 0;
      while (b < 74 && x >= (b + 1) / 75.0) ++b;
      ++counts[b];
    }
    double kl = 0;
    for (int b = 0; b < 75; ++b) {
      if (!counts[b]) continue;
      const double p = counts[b] / 3000.0;
      const double q = std::pow(1 - b / 75.0, 3) - std::pow(1 - (b + 1) / 75.0, 3);
      kl += p * std::log(p / q);
    }
    CHECK(expressibility(f, 4) == doctest::Approx(kl).epsilon(1e-12));
    CHECK(expressibility(f, 4) >= 0);
  }
  SUBCASE("exact Haar sampler calibrates to zero") {
    CHECK(expressibility(haar_fidelities(4, 10000, 42), 16) < 0.05);
  }
  SUBCASE("deeper ansatz is more expressive") {
    const auto psi0 = StateVector::zero(4);
    const double e_idle = expressibility(sample_fidelities(ParamCircuit(4, 0), psi0, 5000, 43), 16);
    const double e1 = expressibility(sample_fidelities(build_ansatz(4, 1), psi0, 5000, 43), 16);
    const double e3 = expressibility(sample_fidelities(build_ansatz(4, 3), psi0, 5000, 43), 16);
    CHECK(e3 < e1);
    CHECK(e1 < e_idle);
  }
  CHECK_THROWS_AS(expressibility(std::vector<double>{}, 4), std::invalid_argument);
  CHECK_THROWS_AS(expressibility(std::vector<double>{1.5}, 4), std::invalid_argument);
  const auto h = FidelityHistogram::build(std::vector<double>{0.0, 0.5, 1.0});
  CHECK(h.bin_edges.size() == 76);
  CHECK(h.counts.front() == 1);
  CHECK(h.counts.back() == 1);
}

TEST_CASE("meyer_wallach") {
  CHECK(meyer_wallach(StateVector::zero(2)) == doctest::Approx(0.0));
  const double r = 1 / std::sqrt(2.0);
  CHECK(std::abs(meyer_wallach(StateVector::from_amplitudes({r, 0, 0, r})) - 1) < 1e-10);
  ComplexVec ghz(8, 0.0);
  ghz[0] = ghz[7] = r;
  CHECK(std::abs(meyer_wallach(StateVector::from_amplitudes(ghz)) - 1) < 1e-10);
  CHECK(std::abs(meyer_wallach(w_state()) - 8.0 / 9.0) < 1e-10);
  CHECK(std::abs(mw_oracle(w_state()) - 8.0 / 9.0) < 1e-12);
  CHECK_THROWS_AS(meyer_wallach(StateVector::zero(1)), std::invalid_argument);

  auto rng = substream(44);
  for (int n = 2; n <= 5; ++n)
    for (int trial = 0; trial < 10; ++trial) {
      const auto psi = testing::random_state(n, rng);
      CHECK(std::abs(meyer_wallach(psi) - mw_oracle(psi)) < 1e-12);
    }
}

TEST_CASE("entangling_capability") {
  CHECK(entangling_capability(rotation_only(4), StateVector::zero(4), 200, 45) < 1e-10);
  ParamCircuit bell(2, 0);
  bell.add(Gate::h(0)).add(Gate::cnot(0, 1));
  CHECK(std::abs(entangling_capability(bell, StateVector::zero(2), 5, 46) - 1) < 1e-12);
  const auto c = build_ansatz(4, 1);
  const double q = entangling_capability(c, StateVector::zero(4), 1000, 47);
  CHECK(q > 0.5);
  CHECK(q == entangling_capability(c, StateVector::zero(4), 1000, 47, 4));
}

TEST_CASE("bloch_points") {
  for (const auto& v : bloch_points(rotation_only(3), StateVector::zero(3), 1, 200, 48))
    CHECK(std::abs(std::hypot(v[0], v[1], v[2]) - 1) < 1e-10);

  const auto c = build_ansatz(4, 2);
  const auto pts = bloch_points(c, StateVector::zero(4), 0, 1000, 49);
  std::size_t interior = 0;
  for (const auto& v : pts) {
    const double n = std::hypot(v[0], v[1], v[2]);
    CHECK(n <= 1 + 1e-10);
    interior += n < 0.9;
  }
  CHECK(interior >= 500);

  auto rng = substream(50);
  for (int trial = 0; trial < 20; ++trial) {
    const auto psi = testing::random_state(3, rng);
    const auto rho = reduced_qubit_state(psi, trial % 3);
    const auto v = bloch_vector(rho);
    CHECK(std::abs(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - (2 * purity(rho) - 1)) < 1e-10);
  }
  // |+i> points along +y.
  const double r = 1 / std::sqrt(2.0);
  const auto plus_i = bloch_vector(reduced_qubit_state(StateVector::from_amplitudes({r, 0, cplx(0, r), 0}), 0));
  CHECK(plus_i[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(bloch_points(c, StateVector::zero(4), 4, 1, 1), std::out_of_range);
}

TEST_CASE("frechet_gaussian") {
  auto rng = substream(51);
  const auto a = gaussian_set(300, {0, 0, 0}, rng);
  CHECK(std::abs(frechet_gaussian(a, a)) < 1e-8);

  const auto b = gaussian_set(300, {0.5, -0.2, 1}, rng);
  CHECK(std::abs(frechet_gaussian(a, b) - frechet_gaussian(b, a)) < 1e-8);

  const auto big_a = gaussian_set(20000, {0, 0}, rng);
  const auto big_b = gaussian_set(20000, {1, 2}, rng);
  CHECK(std::abs(frechet_gaussian(big_a, big_b) - 5.0) < 0.1);

  const std::vector<double> mu_a{0.1, 0.2, -0.3, 0.4}, mu_b{0.0, 1.0, 0.5, 0.4};
  const std::vector<double> c_a{0.5, 1.0, 2.0, 0.1}, c_b{1.5, 0.2, 2.0, 0.7};
  double expect = 0;
  for (int i = 0; i < 4; ++i) {
    const double va = 2 * c_a[i] * c_a[i] / 7 + 1e-6, vb = 2 * c_b[i] * c_b[i] / 7 + 1e-6;
    expect += std::pow(mu_a[i] - mu_b[i], 2) + std::pow(std::sqrt(va) - std::sqrt(vb), 2);
  }
  CHECK(std::abs(frechet_gaussian(axis_set(mu_a, c_a), axis_set(mu_b, c_b)) - expect) < 1e-8);

  SUBCASE("degenerate image-sized covariance") {
    const auto x = gaussian_set(50, std::vector<double>(256, 0.5), rng);
    const auto y = gaussian_set(50, std::vector<double>(256, 0.0), rng);
    const double d = frechet_gaussian(x, y);
    CHECK(std::isfinite(d));
    CHECK(d > 0);
  }
  CHECK_THROWS_AS(frechet_gaussian(a, gaussian_set(10, {0, 0}, rng)), std::invalid_argument);
  CHECK_THROWS_AS(frechet_gaussian({{1.0}}, {{1.0}, {2.0}}), std::invalid_argument);
}
