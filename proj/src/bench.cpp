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

#include "qdiff/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qdiff/parallel.hpp"

namespace qdiff::bench {

namespace {

std::vector<double> uniform_angles(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
  std::vector<double> p(n);
  for (auto& x : p) x = u(rng);
  return p;
}

double pair_fidelity(const StateVector& a, const StateVector& b) {
  return std::min(1.0, std::norm(inner(a.amps(), b.amps())));
}

}  // namespace

double haar_pdf(double f, std::size_t dim) {
  if (dim < 2) throw std::invalid_argument("haar_pdf: N must be >= 2");
  if (!(f >= 0 && f <= 1)) throw std::invalid_argument("haar_pdf: F outside [0,1]");
  return double(dim - 1) * std::pow(1 - f, double(dim) - 2);
}

double haar_bin_mass(double lo, double hi, std::size_t dim) {
  if (dim < 2) throw std::invalid_argument("haar_bin_mass: N must be >= 2");
  const double k = double(dim) - 1;
  return std::pow(1 - lo, k) - std::pow(1 - hi, k);
}

FidelityHistogram FidelityHistogram::build(std::span<const double> fids, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram: need at least one bin");
  FidelityHistogram h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges[i] = double(i) / double(bins);
  h.counts.assign(bins, 0);
  for (double f : fids) {
    if (!(f >= -1e-12 && f <= 1 + 1e-12)) throw std::invalid_argument("histogram: fidelity outside [0,1]");
    const auto b = static_cast<std::size_t>(std::clamp(f, 0.0, 1.0) * double(bins));
    ++h.counts[std::min(b, bins - 1)];
  }
  h.n_samples = fids.size();
  return h;
}

std::vector<double> sample_fidelities(const circuit::ParamCircuit& c, const StateVector& psi0,
                                      std::size_t n_pairs, std::uint64_t seed, int threads) {
  if (n_pairs == 0) throw std::invalid_argument("sample_fidelities: n_pairs must be >= 1");
  std::vector<double> out(n_pairs);
  parallel_for(n_pairs, threads, [&](std::size_t i) {
    auto rng = substream(seed, {i});
    const auto theta = uniform_angles(c.n_params(), rng);
    const auto phi = uniform_angles(c.n_params(), rng);
    out[i] = pair_fidelity(circuit::run_circuit(c, psi0, theta), circuit::run_circuit(c, psi0, phi));
  });
  return out;
}

StateVector haar_state(int n_qubits, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexVec v(std::size_t{1} << n_qubits);
  for (auto& a : v) {
    const double re = g(rng);
    a = cplx(re, g(rng));
  }
  const double norm = std::sqrt(norm_squared(v));
  for (auto& a : v) a /= norm;
  return StateVector::from_amplitudes(std::move(v));
}

std::vector<double> haar_fidelities(int n_qubits, std::size_t n_pairs, std::uint64_t seed, int threads) {
  if (n_pairs == 0) throw std::invalid_argument("haar_fidelities: n_pairs must be >= 1");
  std::vector<double> out(n_pairs);
  parallel_for(n_pairs, threads, [&](std::size_t i) {
    auto rng = substream(seed, {i});
    const auto a = haar_state(n_qubits, rng);
    out[i] = pair_fidelity(a, haar_state(n_qubits, rng));
  });
  return out;
}

double expressibility(std::span<const double> fids, std::size_t dim) {
  if (fids.empty()) throw std::invalid_argument("expressibility: empty sample set");
  const auto h = FidelityHistogram::build(fids);
  double e = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] == 0) continue;
    const double p = double(h.counts[i]) / double(h.n_samples);
    const double q = haar_bin_mass(h.bin_edges[i], h.bin_edges[i + 1], dim);
    e += p * std::log(p / q);
  }
  return std::max(0.0, e);
}

double meyer_wallach(const StateVector& psi) {
  const int n = psi.n_qubits();
  if (n < 2) throw std::invalid_argument("meyer_wallach: need at least two qubits");
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += 1.0 - purity(reduced_qubit_state(psi, k));
  return std::clamp(2.0 * acc / n, 0.0, 1.0);
}

double entangling_capability(const circuit::ParamCircuit& c, const StateVector& psi0, std::size_t samples,
                             std::uint64_t seed, int threads) {
  if (samples == 0) throw std::invalid_argument("entangling_capability: S must be >= 1");
  std::vector<double> q(samples);
  parallel_for(samples, threads, [&](std::size_t i) {
    auto rng = substream(seed, {i});
    q[i] = meyer_wallach(circuit::run_circuit(c, psi0, uniform_angles(c.n_params(), rng)));
  });
  double acc = 0.0;
  for (double v : q) acc += v;
  return acc / double(samples);
}

BlochVector bloch_vector(const ComplexMatrix& rho1) {
  if (rho1.rows() != 2 || rho1.cols() != 2) throw std::invalid_argument("bloch_vector: expected a 2x2 matrix");
  return {2 * rho1(0, 1).real(), -2 * rho1(0, 1).imag(), (rho1(0, 0) - rho1(1, 1)).real()};
}

std::vector<BlochVector> bloch_points(const circuit::ParamCircuit& c, const StateVector& psi0, int qubit,
                                      std::size_t samples, std::uint64_t seed, int threads) {
  if (qubit < 0 || qubit >= c.n_qubits()) throw std::out_of_range("bloch_points: qubit index out of range");
  std::vector<BlochVector> out(samples);
  parallel_for(samples, threads, [&](std::size_t i) {
    auto rng = substream(seed, {i});
    const auto psi = circuit::run_circuit(c, psi0, uniform_angles(c.n_params(), rng));
    out[i] = bloch_vector(reduced_qubit_state(psi, qubit));
  });
  return out;
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["expressibility"] = expressibility;
  j["entangling_capability"] = entangling_capability;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

GaussianFit fit_gaussian(const std::vector<std::vector<double>>& set) {
  if (set.size() < 2) throw std::invalid_argument("fit_gaussian: need at least two samples");
  const std::size_t d = set.front().size();
  GaussianFit fit{std::vector<double>(d, 0.0), ComplexMatrix(d, d)};
  for (const auto& v : set) {
    if (v.size() != d) throw std::invalid_argument("fit_gaussian: inconsistent sample dimension");
    for (std::size_t i = 0; i < d; ++i) fit.mean[i] += v[i];
  }
  for (auto& m : fit.mean) m /= double(set.size());
  std::vector<double> cov(d * d, 0.0), c(d);
  for (const auto& v : set) {
    for (std::size_t i = 0; i < d; ++i) c[i] = v[i] - fit.mean[i];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov[i * d + j] += c[i] * c[j];
  }
  const double norm = 1.0 / double(set.size() - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) fit.cov(i, j) = fit.cov(j, i) = cov[i * d + j] * norm;
  return fit;
}

namespace {

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("frechet_gaussian: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = -1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] < tol) throw std::runtime_error("frechet_gaussian: covariance is not positive semidefinite");
    ev[k] = std::sqrt(std::max(ev[k], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd real_part(const ComplexMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j).real();
  return out;
}

}  // namespace

double frechet_gaussian(const std::vector<std::vector<double>>& set_a, const std::vector<std::vector<double>>& set_b) {
  if (set_a.empty() || set_b.empty() || set_a.front().size() != set_b.front().size())
    throw std::invalid_argument("frechet_gaussian: dimension mismatch");
  const auto a = fit_gaussian(set_a), b = fit_gaussian(set_b);
  const std::size_t d = a.mean.size();
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const Eigen::MatrixXd reg = 1e-6 * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd ca = real_part(a.cov) + reg, cb = real_part(b.cov) + reg;
  const Eigen::MatrixXd sa = sqrt_psd(ca);
  Eigen::MatrixXd inner_m = sa * cb * sa;
  inner_m = 0.5 * (inner_m + inner_m.transpose()).eval();
  const double tr = ca.trace() + cb.trace() - 2.0 * sqrt_psd(inner_m).trace();
  return std::max(0.0, mean_term + tr);
}

}  // namespace qdiff::bench
