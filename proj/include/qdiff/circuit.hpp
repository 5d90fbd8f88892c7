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

// Gate set, parameterized circuits and statevector simulation.

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdiff/qcore.hpp"

namespace qdiff::circuit {

enum class GateKind { H, X, Z, RX, RY, RZ, Phase, CNOT, CZ, ControlledUnitary };

std::string_view to_string(GateKind kind);
bool is_rotation(GateKind kind);

/// One gate of a circuit.
///
/// Rotation and Phase gates carry exactly one of `param_ref` (angle =
/// scale * params[param_ref] + offset) or `fixed_angle`. CNOT targets are
/// {control, target}. ControlledUnitary targets are {control, t_1, ..., t_m}
/// and `unitary` is a 2^m x 2^m matrix acting on t_1..t_m (t_1 most
/// significant).
struct Gate {
  GateKind kind = GateKind::H;
  std::vector<int> targets;
  std::optional<std::size_t> param_ref;
  std::optional<double> fixed_angle;
  double scale = 1.0;
  double offset = 0.0;
  std::shared_ptr<const ComplexMatrix> unitary;

  static Gate of(GateKind kind, std::vector<int> targets) {
    Gate g;
    g.kind = kind;
    g.targets = std::move(targets);
    return g;
  }
  static Gate h(int q) { return of(GateKind::H, {q}); }
  static Gate x(int q) { return of(GateKind::X, {q}); }
  static Gate z(int q) { return of(GateKind::Z, {q}); }
  static Gate cnot(int control, int target) { return of(GateKind::CNOT, {control, target}); }
  static Gate cz(int a, int b) { return of(GateKind::CZ, {a, b}); }
  static Gate fixed(GateKind kind, int q, double angle);
  static Gate param(GateKind kind, int q, std::size_t ref, double scale = 1.0, double offset = 0.0);
  static Gate controlled(int control, std::vector<int> targets, ComplexMatrix u);

  /// Rotation angle given the circuit parameters.
  double angle(std::span<const double> params) const;
};

/// Validates a gate against a register size. Throws std::invalid_argument.
void validate_gate(const Gate& g, int n_qubits);

class ParamCircuit {
 public:
  ParamCircuit() = default;
  ParamCircuit(int n_qubits, std::size_t n_params);

  int n_qubits() const { return n_qubits_; }
  std::size_t n_params() const { return n_params_; }
  const std::vector<Gate>& gates() const { return gates_; }
  std::size_t size() const { return gates_.size(); }

  /// Reserves `count` new parameter slots, returning the first index.
  std::size_t add_params(std::size_t count);
  ParamCircuit& add(Gate g);
  ParamCircuit& add(std::span<const Gate> gs);

 private:
  int n_qubits_ = 1;
  std::size_t n_params_ = 0;
  std::vector<Gate> gates_;
};

/// 2x2 matrix of a single-qubit gate at a given angle.
ComplexMatrix single_qubit_matrix(GateKind kind, double angle);

StateVector apply_gate(const StateVector& psi, const Gate& g, std::span<const double> params);

StateVector run_circuit(const ParamCircuit& c, const StateVector& psi0, std::span<const double> params);

/// Like run_circuit, with `angle_shift` added to the angle of gate `gate_index` only.
StateVector run_circuit_shifted(const ParamCircuit& c, const StateVector& psi0,
                                std::span<const double> params, std::size_t gate_index,
                                double angle_shift);

/// Dense unitary of the circuit; n_qubits <= 10.
ComplexMatrix circuit_unitary(const ParamCircuit& c, std::span<const double> params);

/// Two-qubit non-local block realizing exp(-i(a XX + b YY + g ZZ)) up to a
/// global phase, with (a, b, g) = params[refs[0..2]]. Three CNOTs with
/// alternating direction.
std::vector<Gate> vw_block(int q0, int q1, std::array<std::size_t, 3> refs);

/// H on every qubit, CZ on each adjacent pair, then RX(params[refs[j]]) on qubit j.
std::vector<Gate> mixing_layer(int n_qubits, std::span<const std::size_t> refs);

/// Qubit pairs covered by one brick layer: (0,1),(2,3),... then (1,2),(3,4),...
std::vector<std::array<int, 2>> brick_pairs(int n_qubits);

/// n_layers * (3 * |brick_pairs| + n_qubits).
std::size_t ansatz_param_count(int n_qubits, int n_layers);

/// Layers of vw_block on brick pairs followed by one mixing_layer.
ParamCircuit build_ansatz(int n_qubits, int n_layers);

/// One gate per line: `KIND targets... [pN [scale=..] [offset=..] | angle]`.
std::string dump(const ParamCircuit& c);

}  // namespace qdiff::circuit
