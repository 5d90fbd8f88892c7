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

// Trainable Hermitian measurements and the ancilla overlap feature.

#include <filesystem>
#include <span>
#include <vector>

#include "qdiff/circuit.hpp"
#include "qdiff/qcore.hpp"
#include "qdiff/rng.hpp"

namespace qdiff::measure {

/// Learnable complex matrix M = m_real + i m_imag (D x D, row-major). The
/// measured operator is H = (M + M^dagger) / 2.
struct AdaptiveObservable {
  std::size_t dim = 0;
  std::vector<double> m_real;
  std::vector<double> m_imag;

  static AdaptiveObservable zeros(std::size_t dim);
  /// Entries i.i.d. uniform in [-1/D, 1/D].
  static AdaptiveObservable random(std::size_t dim, Rng& rng);
  static AdaptiveObservable from_matrix(const ComplexMatrix& m);
};

struct ObservableBank {
  std::vector<AdaptiveObservable> observables;

  static ObservableBank random(std::size_t k, std::size_t dim, Rng& rng);
  std::size_t size() const { return observables.size(); }
  std::size_t dim() const { return observables.empty() ? 0 : observables.front().dim; }
  /// Throws unless K >= 1 and every observable has the same dim.
  void validate() const;
};

/// The U(theta) of a Hadamard test together with its parameters.
struct GlobalProbe {
  circuit::ParamCircuit circuit;
  std::vector<double> params;
};

ComplexMatrix hermitize(const AdaptiveObservable& obs);

/// <psi|H|psi> for Hermitian h; throws if the imaginary residue exceeds 1e-10.
double expectation(const StateVector& psi, const ComplexMatrix& h);
double expectation(const StateVector& psi, const AdaptiveObservable& obs);

std::vector<double> ano_features(const StateVector& psi, const ObservableBank& bank);

/// Simulates ancilla H, controlled-U, ancilla H on n+1 qubits and returns <Z_ancilla>.
double hadamard_test(const StateVector& psi, const GlobalProbe& probe);

/// Re<psi|U|psi>, computed directly.
double overlap_real(const StateVector& psi, const GlobalProbe& probe);

struct ObservableGradient {
  std::vector<double> d_real;  // dy/dm_real, row-major
  std::vector<double> d_imag;  // dy/dm_imag
};

/// Every observable sees the same state, so dy_k/dM_k is shared:
/// dy/dm_real[i][j] = Re(conj(psi_i) psi_j), dy/dm_imag[i][j] = -Im(conj(psi_i) psi_j).
ObservableGradient grad_expectation_wrt_observable(const StateVector& psi);
std::vector<ObservableGradient> grad_features_wrt_observables(const StateVector& psi,
                                                              const ObservableBank& bank);

/// d<psi(theta)|h|psi(theta)>/d theta by the two-term parameter-shift rule
/// (shift pi/2 on each gate angle, chain rule through the gate's scale).
std::vector<double> grad_expectation_wrt_circuit(const circuit::ParamCircuit& c, const StateVector& psi0,
                                                 std::span<const double> params, const ComplexMatrix& h);

/// K x n_params Jacobian of the ANO features.
std::vector<std::vector<double>> grad_features_wrt_circuit(const circuit::ParamCircuit& c,
                                                           const StateVector& psi0,
                                                           std::span<const double> params,
                                                           const ObservableBank& bank);

/// d Re<psi|U(phi)|psi> / d phi. Rotation gates enter the overlap at half
/// frequency, so the rule uses a shift of pi and a factor 1/4; Phase gates
/// use the pi/2 rule.
std::vector<double> grad_overlap_wrt_probe(const StateVector& psi, const GlobalProbe& probe);

/// (B + B^dagger)/2 with B = U(phi): the Hermitian operator whose expectation is the overlap feature.
ComplexMatrix overlap_operator(const GlobalProbe& probe);

/// Binary layout (little-endian): u64 K, u64 D, then per observable D*D real
/// parts row-major followed by D*D imaginary parts, all f64.
void save_bank(const ObservableBank& bank, const std::filesystem::path& path);
ObservableBank load_bank(const std::filesystem::path& path);
std::string bank_to_json(const ObservableBank& bank);
ObservableBank bank_from_json(const std::string& text);

}  // namespace qdiff::measure
