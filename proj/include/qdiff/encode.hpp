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

// Classical-to-quantum data encodings.

#include <cstdint>
#include <span>
#include <string_view>

#include "qdiff/qcore.hpp"

namespace qdiff::encode {

enum class EncodingKind { Basis, Amplitude, Angle, Phase, DenseAngle };

std::string_view to_string(EncodingKind kind);

/// |b_1 ... b_P>, b_1 on qubit 0 (most significant bit).
StateVector encode_basis(std::span<const int> bits);

/// x / ||x||, zero-padded at the tail to 2^n_qubits. Throws on an all-zero input.
StateVector encode_amplitude(std::span<const cplx> x, int n_qubits);
StateVector encode_amplitude(std::span<const double> x, int n_qubits);

/// (x) RY(x_k)|0>.
StateVector encode_angle(std::span<const double> x);

/// (x) (|0> + e^{i x_k}|1>)/sqrt(2).
StateVector encode_phase(std::span<const double> x);

/// (x) (cos x_{2k-1}|0> + e^{i x_{2k}} sin x_{2k-1}|1>), two features per qubit,
/// full (not half) angles.
StateVector encode_dense_angle(std::span<const double> x);

}  // namespace qdiff::encode
