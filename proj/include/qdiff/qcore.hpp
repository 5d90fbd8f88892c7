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

// Complex linear algebra and quantum-state primitives.
//
// Qubit ordering used throughout the library: qubit 0 is the leftmost ket
// label and the most-significant bit of the basis index, i.e.
// |q0 q1 ... q_{n-1}> <-> index sum_j q_j * 2^(n-1-j).

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qdiff {

using cplx = std::complex<double>;
using ComplexVec = std::vector<cplx>;

inline constexpr int kMaxQubits = 12;

/// Bit mask of qubit `q` inside an `n`-qubit basis index.
constexpr std::size_t qubit_mask(int n_qubits, int q) {
  return std::size_t{1} << (n_qubits - 1 - q);
}

/// Dense complex matrix, row-major.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(std::span<const cplx> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const cplx> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  ComplexMatrix adjoint() const;
  cplx trace() const;
  bool is_hermitian(double tol) const;
  bool all_finite() const;

  /// Largest |a_ij - b_ij|; shapes must agree.
  double max_abs_diff(const ComplexMatrix& other) const;
  double frobenius_norm() const;

  ComplexMatrix& operator+=(const ComplexMatrix& o);
  ComplexMatrix& operator-=(const ComplexMatrix& o);
  ComplexMatrix& operator*=(cplx s);

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// M * v.
ComplexVec matvec(const ComplexMatrix& m, std::span<const cplx> v);
/// <a|b> = sum conj(a_i) b_i.
cplx inner(std::span<const cplx> a, std::span<const cplx> b);
double norm_squared(std::span<const cplx> v);

/// Normalized pure state on n qubits.
class StateVector {
 public:
  /// Validates length (power of two, n <= kMaxQubits), finiteness and unit norm.
  static StateVector from_amplitudes(ComplexVec amps, double tol = 1e-10);
  static StateVector basis(int n_qubits, std::size_t index);
  static StateVector zero(int n_qubits) { return basis(n_qubits, 0); }

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const cplx> amps() const { return amps_; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }
  const ComplexVec& vec() const { return amps_; }

 private:
  StateVector(ComplexVec amps, int n_qubits) : amps_(std::move(amps)), n_qubits_(n_qubits) {}
  ComplexVec amps_;
  int n_qubits_ = 0;
};

/// Number of qubits for a power-of-two dimension; throws otherwise.
int qubits_for_dim(std::size_t dim);

/// Hermitian, PSD, unit-trace matrix of dimension 2^n.
class DensityMatrix {
 public:
  /// Checks Hermiticity, unit trace (1e-10) and eigenvalues >= -1e-10.
  static DensityMatrix from_matrix(ComplexMatrix m);
  /// Skips validation; for results of operations known to preserve validity.
  static DensityMatrix assume_valid(ComplexMatrix m);
  static DensityMatrix maximally_mixed(int n_qubits);

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return mat_.rows(); }
  const ComplexMatrix& mat() const { return mat_; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return mat_(i, j); }

 private:
  DensityMatrix(ComplexMatrix m, int n);
  ComplexMatrix mat_;
  int n_qubits_ = 0;
};

/// Kronecker product: (a (x) b)[i*rb + k, j*cb + l] = a[i,j] * b[k,l].
ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b);

DensityMatrix outer_product(const StateVector& psi);

/// 2x2 reduced density matrix of qubit `keep`.
DensityMatrix partial_trace(const DensityMatrix& rho, int keep);

/// Reduced state of one qubit straight from a pure state, without forming |psi><psi|.
ComplexMatrix reduced_qubit_state(const StateVector& psi, int keep);

/// Tr(rho^2).
double purity(const DensityMatrix& rho);
double purity(const ComplexMatrix& rho);

/// <target|rho|target>, clamped to [0, 1].
double state_fidelity(const DensityMatrix& rho, const StateVector& target);

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  ComplexMatrix vectors;       // column k is the eigenvector of values[k]
};

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
/// Stops when the off-diagonal Frobenius norm drops below
/// 1e-12 * max(1, ||h||_F) or after 100 sweeps.
EigenDecomposition eigh(const ComplexMatrix& h);

/// exp(i * scale * h) for Hermitian h.
ComplexMatrix expm_hermitian(const ComplexMatrix& h, double scale);

/// Hermitian PSD square root. Eigenvalues in [-1e-8, 0) are clamped to zero;
/// anything lower is rejected.
ComplexMatrix sqrtm_psd(const ComplexMatrix& m);

namespace pauli {
ComplexMatrix I();
ComplexMatrix X();
ComplexMatrix Y();
ComplexMatrix Z();
}  // namespace pauli

}  // namespace qdiff
