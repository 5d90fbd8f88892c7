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

#include "qdiff/qcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace qdiff {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("ComplexMatrix: data size does not match shape");
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> diag) {
  ComplexMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
  return out;
}

cplx ComplexMatrix::trace() const {
  cplx t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

bool ComplexMatrix::is_hermitian(double tol) const {
  if (!square()) return false;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i; j < cols_; ++j)
      if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
  return true;
}

bool ComplexMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

double ComplexMatrix::max_abs_diff(const ComplexMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k) m = std::max(m, std::abs(data_[k] - other.data_[k]));
  return m;
}

double ComplexMatrix::frobenius_norm() const {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("matrix add: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("matrix sub: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
  for (auto& z : data_) z *= s;
  return *this;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix multiply: inner dimension mismatch");
  ComplexMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

ComplexVec matvec(const ComplexMatrix& m, std::span<const cplx> v) {
  if (m.cols() != v.size()) throw std::invalid_argument("matvec: dimension mismatch");
  ComplexVec out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner: dimension mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm_squared(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

int qubits_for_dim(std::size_t dim) {
  if (dim < 2 || !std::has_single_bit(dim)) {
    throw std::invalid_argument("dimension " + std::to_string(dim) + " is not a power of two >= 2");
  }
  const int n = std::countr_zero(dim);
  if (n > kMaxQubits) throw std::invalid_argument("more than 12 qubits");
  return n;
}

StateVector StateVector::from_amplitudes(ComplexVec amps, double tol) {
  const int n = qubits_for_dim(amps.size());
  for (const auto& z : amps) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw std::invalid_argument("StateVector: non-finite amplitude");
    }
  }
  const double nrm = std::sqrt(norm_squared(amps));
  if (std::abs(nrm - 1.0) >= tol) {
    throw std::invalid_argument("StateVector: norm " + std::to_string(nrm) + " is not 1");
  }
  return StateVector(std::move(amps), n);
}

StateVector StateVector::basis(int n_qubits, std::size_t index) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw std::invalid_argument("StateVector: bad qubit count");
  const std::size_t dim = std::size_t{1} << n_qubits;
  if (index >= dim) throw std::out_of_range("StateVector: basis index out of range");
  ComplexVec amps(dim);
  amps[index] = 1.0;
  return StateVector(std::move(amps), n_qubits);
}

DensityMatrix::DensityMatrix(ComplexMatrix m, int n) : mat_(std::move(m)), n_qubits_(n) {}

DensityMatrix DensityMatrix::assume_valid(ComplexMatrix m) {
  if (!m.square()) throw std::invalid_argument("DensityMatrix: not square");
  const int n = qubits_for_dim(m.rows());
  return DensityMatrix(std::move(m), n);
}

DensityMatrix DensityMatrix::from_matrix(ComplexMatrix m) {
  if (!m.square()) throw std::invalid_argument("DensityMatrix: not square");
  const int n = qubits_for_dim(m.rows());
  if (!m.all_finite()) throw std::invalid_argument("DensityMatrix: non-finite entry");
  if (!m.is_hermitian(1e-10)) throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(m.trace() - 1.0) > 1e-10) throw std::invalid_argument("DensityMatrix: trace is not 1");
  const auto eig = eigh(m);
  if (eig.values.front() < -1e-10) throw std::invalid_argument("DensityMatrix: negative eigenvalue");
  return DensityMatrix(std::move(m), n);
}

DensityMatrix DensityMatrix::maximally_mixed(int n_qubits) {
  const std::size_t d = std::size_t{1} << n_qubits;
  auto m = ComplexMatrix::identity(d);
  m *= 1.0 / static_cast<double>(d);
  return DensityMatrix(std::move(m), n_qubits);
}

ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t rb = b.rows(), cb = b.cols();
  ComplexMatrix out(a.rows() * rb, a.cols() * cb);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const cplx aij = a(i, j);
      for (std::size_t k = 0; k < rb; ++k)
        for (std::size_t l = 0; l < cb; ++l) out(i * rb + k, j * cb + l) = aij * b(k, l);
    }
  return out;
}

DensityMatrix outer_product(const StateVector& psi) {
  const std::size_t d = psi.dim();
  ComplexMatrix m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = psi[i] * std::conj(psi[j]);
  return DensityMatrix::assume_valid(std::move(m));
}

DensityMatrix partial_trace(const DensityMatrix& rho, int keep) {
  const int n = rho.n_qubits();
  if (keep < 0 || keep >= n) throw std::out_of_range("partial_trace: qubit index out of range");
  const std::size_t mask = qubit_mask(n, keep);
  ComplexMatrix out(2, 2);
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    if (i & mask) continue;
    // i enumerates the traced-out configuration with the kept bit cleared.
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) out(a, b) += rho(i | (a ? mask : 0), i | (b ? mask : 0));
  }
  return DensityMatrix::assume_valid(std::move(out));
}

ComplexMatrix reduced_qubit_state(const StateVector& psi, int keep) {
  const int n = psi.n_qubits();
  if (keep < 0 || keep >= n) throw std::out_of_range("reduced_qubit_state: qubit index out of range");
  const std::size_t mask = qubit_mask(n, keep);
  cplx r00 = 0.0, r01 = 0.0, r11 = 0.0;
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    if (i & mask) continue;
    const cplx a0 = psi[i], a1 = psi[i | mask];
    r00 += std::norm(a0);
    r11 += std::norm(a1);
    r01 += a0 * std::conj(a1);
  }
  return ComplexMatrix(2, 2, {r00, r01, std::conj(r01), r11});
}

double purity(const ComplexMatrix& rho) {
  // Tr(rho^2) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho.
  double s = 0.0;
  for (std::size_t i = 0; i < rho.rows(); ++i)
    for (std::size_t j = 0; j < rho.cols(); ++j) s += (rho(i, j) * rho(j, i)).real();
  return s;
}

double purity(const DensityMatrix& rho) { return purity(rho.mat()); }

double state_fidelity(const DensityMatrix& rho, const StateVector& target) {
  if (rho.dim() != target.dim()) throw std::invalid_argument("state_fidelity: dimension mismatch");
  const auto rt = matvec(rho.mat(), target.amps());
  return std::clamp(inner(target.amps(), rt).real(), 0.0, 1.0);
}

EigenDecomposition eigh(const ComplexMatrix& h) {
  if (!h.square()) throw std::invalid_argument("eigh: matrix is not square");
  const std::size_t n = h.rows();
  ComplexMatrix a = h;
  ComplexMatrix v = ComplexMatrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();

  const double stop = 1e-12 * std::max(1.0, h.frobenius_norm());
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * std::norm(a(i, j));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double r = std::abs(apq);
        if (r < 1e-300) continue;
        // Phase-rotate the pair to a real symmetric 2x2 block, then apply a
        // real Jacobi rotation. J = diag(1, e^{-i phi}) * [[c, s], [-s, c]].
        const cplx ph = apq / r;  // e^{i phi}
        const double app = a(p, p).real(), aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * r);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const cplx jqp = -s * std::conj(ph);
        const cplx jqq = c * std::conj(ph);

        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * c + akq * jqp;
          a(k, q) = akp * s + akq * jqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk + std::conj(jqp) * aqk;
          a(q, k) = s * apk + std::conj(jqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < n; ++k) {
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * c + vkq * jqp;
          v(k, q) = vkp * s + vkq * jqq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });
  EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

namespace {

// V f(D) V^dagger.
ComplexMatrix spectral_apply(const EigenDecomposition& eig, std::span<const cplx> f) {
  const std::size_t n = eig.values.size();
  ComplexMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const cplx vik = eig.vectors(i, k) * f[k];
      if (vik == cplx{}) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(eig.vectors(j, k));
    }
  return out;
}

}  // namespace

ComplexMatrix expm_hermitian(const ComplexMatrix& h, double scale) {
  if (!h.is_hermitian(1e-10)) throw std::invalid_argument("expm_hermitian: input is not Hermitian");
  const auto eig = eigh(h);
  ComplexVec f(eig.values.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::polar(1.0, scale * eig.values[k]);
  return spectral_apply(eig, f);
}

ComplexMatrix sqrtm_psd(const ComplexMatrix& m) {
  if (!m.is_hermitian(1e-8)) throw std::invalid_argument("sqrtm_psd: input is not Hermitian");
  const auto eig = eigh(m);
  ComplexVec f(eig.values.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double lam = eig.values[k];
    if (lam < -1e-8) {
      throw std::invalid_argument("sqrtm_psd: negative eigenvalue " + std::to_string(lam));
    }
    f[k] = std::sqrt(std::max(lam, 0.0));
  }
  return spectral_apply(eig, f);
}

namespace pauli {
ComplexMatrix I() { return ComplexMatrix::identity(2); }
ComplexMatrix X() { return ComplexMatrix(2, 2, {0.0, 1.0, 1.0, 0.0}); }
ComplexMatrix Y() { return ComplexMatrix(2, 2, {0.0, cplx(0, -1), cplx(0, 1), 0.0}); }
ComplexMatrix Z() { return ComplexMatrix(2, 2, {1.0, 0.0, 0.0, -1.0}); }
}  // namespace pauli

}  // namespace qdiff
