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

#pragma once

// Circuit descriptors (expressibility, entangling capability, Bloch clouds)
// and the Gaussian Frechet distance used as a generation-quality proxy.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdiff/circuit.hpp"
#include "qdiff/qcore.hpp"
#include "qdiff/rng.hpp"

namespace qdiff::bench {

inline constexpr std::size_t kHistogramBins = 75;

/// (N-1)(1-F)^(N-2).
double haar_pdf(double f, std::size_t dim);

/// Integral of haar_pdf over [lo, hi].
double haar_bin_mass(double lo, double hi, std::size_t dim);

struct FidelityHistogram {
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> counts;
  std::size_t n_samples = 0;

  /// F = 1 lands in the last bin.
  static FidelityHistogram build(std::span<const double> fids, std::size_t bins = kHistogramBins);
};

/// For each pair draws theta, phi uniform in [0, 2pi)^P from substream(seed, {pair})
/// and records |<psi_theta|psi_phi>|^2.
std::vector<double> sample_fidelities(const circuit::ParamCircuit& c, const StateVector& psi0,
                                      std::size_t n_pairs, std::uint64_t seed, int threads = 1);

/// Normalized complex Gaussian vector: an exact Haar-random pure state.
StateVector haar_state(int n_qubits, Rng& rng);
std::vector<double> haar_fidelities(int n_qubits, std::size_t n_pairs, std::uint64_t seed, int threads = 1);

/// KL(P_circuit || P_Haar) over 75 uniform bins with analytic Haar bin masses.
double expressibility(std::span<const double> fids, std::size_t dim);

double meyer_wallach(const StateVector& psi);

double entangling_capability(const circuit::ParamCircuit& c, const StateVector& psi0, std::size_t samples,
                             std::uint64_t seed, int threads = 1);

using BlochVector = std::array<double, 3>;
BlochVector bloch_vector(const ComplexMatrix& rho1);
std::vector<BlochVector> bloch_points(const circuit::ParamCircuit& c, const StateVector& psi0, int qubit,
                                      std::size_t samples, std::uint64_t seed, int threads = 1);

struct BenchReport {
  double expressibility = 0.0;
  double entangling_capability = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

struct GaussianFit {
  std::vector<double> mean;
  ComplexMatrix cov;  // real symmetric, unbiased (n-1)
};
GaussianFit fit_gaussian(const std::vector<std::vector<double>>& set);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 sqrt(sqrt(S_a) S_b sqrt(S_a))), with
/// 1e-6 I added to both covariances.
double frechet_gaussian(const std::vector<std::vector<double>>& set_a, const std::vector<std::vector<double>>& set_b);

}  // namespace qdiff::bench
