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

#include "qdiff/encode.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qdiff::encode {
namespace {

void check_qubit_count(std::size_t n, const char* who) {
  if (n < 1 || n > static_cast<std::size_t>(kMaxQubits)) {
    throw std::invalid_argument(std::string(who) + ": need 1..12 qubits, got " + std::to_string(n));
  }
}

// Tensor product of single-qubit states (a_k|0> + b_k|1>), qubit 0 first.
StateVector product_state(std::span<const std::pair<cplx, cplx>> qubits) {
  ComplexVec amps{1.0};
  for (const auto& [a, b] : qubits) {
    ComplexVec next(amps.size() * 2);
    for (std::size_t i = 0; i < amps.size(); ++i) {
      next[2 * i] = amps[i] * a;
      next[2 * i + 1] = amps[i] * b;
    }
    amps = std::move(next);
  }
  return StateVector::from_amplitudes(std::move(amps), 1e-12);
}

}  // namespace

std::string_view to_string(EncodingKind kind) {
  switch (kind) {
    case EncodingKind::Basis: return "basis";
    case EncodingKind::Amplitude: return "amplitude";
    case EncodingKind::Angle: return "angle";
    case EncodingKind::Phase: return "phase";
    case EncodingKind::DenseAngle: return "dense_angle";
  }
  return "unknown";
}

StateVector encode_basis(std::span<const int> bits) {
  if (bits.empty()) throw std::invalid_argument("encode_basis: empty bit list");
  check_qubit_count(bits.size(), "encode_basis");
  std::size_t index = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("encode_basis: non-binary entry " + std::to_string(b));
    index = (index << 1) | static_cast<std::size_t>(b);
  }
  return StateVector::basis(static_cast<int>(bits.size()), index);
}

StateVector encode_amplitude(std::span<const cplx> x, int n_qubits) {
  check_qubit_count(static_cast<std::size_t>(std::max(n_qubits, 0)), "encode_amplitude");
  const std::size_t dim = std::size_t{1} << n_qubits;
  if (x.size() > dim) {
    throw std::invalid_argument("encode_amplitude: " + std::to_string(x.size()) +
                                " values do not fit in " + std::to_string(n_qubits) + " qubits");
  }
  const double alpha = std::sqrt(norm_squared(x));
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("encode_amplitude: input has zero (or non-finite) norm");
  }
  ComplexVec amps(dim);
  for (std::size_t i = 0; i < x.size(); ++i) amps[i] = x[i] / alpha;
  return StateVector::from_amplitudes(std::move(amps), 1e-12);
}

StateVector encode_amplitude(std::span<const double> x, int n_qubits) {
  ComplexVec z(x.begin(), x.end());
  return encode_amplitude(std::span<const cplx>(z), n_qubits);
}

StateVector encode_angle(std::span<const double> x) {
  check_qubit_count(x.size(), "encode_angle");
  std::vector<std::pair<cplx, cplx>> q;
  for (double v : x) q.emplace_back(std::cos(v / 2.0), std::sin(v / 2.0));
  return product_state(q);
}

StateVector encode_phase(std::span<const double> x) {
  check_qubit_count(x.size(), "encode_phase");
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<std::pair<cplx, cplx>> q;
  for (double v : x) q.emplace_back(r, std::polar(r, v));
  return product_state(q);
}

StateVector encode_dense_angle(std::span<const double> x) {
  if (x.size() % 2 != 0) throw std::invalid_argument("encode_dense_angle: odd-length input");
  check_qubit_count(x.size() / 2, "encode_dense_angle");
  std::vector<std::pair<cplx, cplx>> q;
  for (std::size_t k = 0; k < x.size(); k += 2) {
    q.emplace_back(std::cos(x[k]), std::sin(x[k]) * std::polar(1.0, x[k + 1]));
  }
  return product_state(q);
}

}  // namespace qdiff::encode
