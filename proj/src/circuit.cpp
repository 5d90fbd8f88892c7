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

#include "qdiff/circuit.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qdiff::circuit {

using std::numbers::pi;

std::string_view to_string(GateKind kind) {
  switch (kind) {
    case GateKind::H: return "H";
    case GateKind::X: return "X";
    case GateKind::Z: return "Z";
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::Phase: return "PHASE";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CZ: return "CZ";
    case GateKind::ControlledUnitary: return "CU";
  }
  return "?";
}

bool is_rotation(GateKind kind) {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ || kind == GateKind::Phase;
}

Gate Gate::fixed(GateKind kind, int q, double angle) {
  Gate g = of(kind, {q});
  g.fixed_angle = angle;
  return g;
}

Gate Gate::param(GateKind kind, int q, std::size_t ref, double scale, double offset) {
  Gate g = of(kind, {q});
  g.param_ref = ref;
  g.scale = scale;
  g.offset = offset;
  return g;
}

Gate Gate::controlled(int control, std::vector<int> targets, ComplexMatrix u) {
  Gate g = of(GateKind::ControlledUnitary, {control});
  g.targets.insert(g.targets.end(), targets.begin(), targets.end());
  g.unitary = std::make_shared<const ComplexMatrix>(std::move(u));
  return g;
}

double Gate::angle(std::span<const double> params) const {
  if (param_ref) {
    if (*param_ref >= params.size()) {
      throw std::out_of_range("gate parameter index " + std::to_string(*param_ref) +
                              " out of range (" + std::to_string(params.size()) + " params)");
    }
    return scale * params[*param_ref] + offset;
  }
  return fixed_angle.value_or(0.0);
}

void validate_gate(const Gate& g, int n_qubits) {
  const auto fail = [&](const std::string& why) {
    throw std::invalid_argument(std::string(to_string(g.kind)) + " gate: " + why);
  };
  std::size_t arity = 1;
  if (g.kind == GateKind::CNOT || g.kind == GateKind::CZ) arity = 2;
  if (g.kind == GateKind::ControlledUnitary) {
    if (g.targets.size() < 2) fail("needs a control and at least one target");
    if (!g.unitary) fail("missing unitary");
    const std::size_t d = std::size_t{1} << (g.targets.size() - 1);
    if (g.unitary->rows() != d || g.unitary->cols() != d) fail("unitary size does not match targets");
  } else if (g.targets.size() != arity) {
    fail("expected " + std::to_string(arity) + " target(s)");
  }
  for (std::size_t i = 0; i < g.targets.size(); ++i) {
    if (g.targets[i] < 0 || g.targets[i] >= n_qubits) fail("qubit index out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (g.targets[i] == g.targets[j]) fail("duplicate qubit");
  }
  const bool has_param = g.param_ref.has_value(), has_fixed = g.fixed_angle.has_value();
  if (is_rotation(g.kind)) {
    if (has_param == has_fixed) fail("needs exactly one of param_ref / fixed_angle");
  } else if (has_param || has_fixed) {
    fail("does not take an angle");
  }
}

ParamCircuit::ParamCircuit(int n_qubits, std::size_t n_params) : n_qubits_(n_qubits), n_params_(n_params) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw std::invalid_argument("ParamCircuit: bad qubit count");
}

std::size_t ParamCircuit::add_params(std::size_t count) {
  const std::size_t first = n_params_;
  n_params_ += count;
  return first;
}

ParamCircuit& ParamCircuit::add(Gate g) {
  validate_gate(g, n_qubits_);
  if (g.param_ref && *g.param_ref >= n_params_) {
    throw std::invalid_argument("ParamCircuit: param_ref " + std::to_string(*g.param_ref) +
                                " >= n_params " + std::to_string(n_params_));
  }
  gates_.push_back(std::move(g));
  return *this;
}

ParamCircuit& ParamCircuit::add(std::span<const Gate> gs) {
  for (const auto& g : gs) add(g);
  return *this;
}

ComplexMatrix single_qubit_matrix(GateKind kind, double angle) {
  const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
  const double r = 1.0 / std::sqrt(2.0);
  switch (kind) {
    case GateKind::H: return ComplexMatrix(2, 2, {r, r, r, -r});
    case GateKind::X: return pauli::X();
    case GateKind::Z: return pauli::Z();
    case GateKind::RX: return ComplexMatrix(2, 2, {c, cplx(0, -s), cplx(0, -s), c});
    case GateKind::RY: return ComplexMatrix(2, 2, {c, -s, s, c});
    case GateKind::RZ: return ComplexMatrix(2, 2, {std::polar(1.0, -angle / 2.0), 0.0, 0.0, std::polar(1.0, angle / 2.0)});
    case GateKind::Phase: return ComplexMatrix(2, 2, {1.0, 0.0, 0.0, std::polar(1.0, angle)});
    default: break;
  }
  throw std::invalid_argument("single_qubit_matrix: not a single-qubit gate");
}

namespace {

void apply_1q(ComplexVec& amps, int n, int q, const ComplexMatrix& m) {
  const std::size_t mask = qubit_mask(n, q);
  const cplx m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if (i & mask) continue;
    const cplx a0 = amps[i], a1 = amps[i | mask];
    amps[i] = m00 * a0 + m01 * a1;
    amps[i | mask] = m10 * a0 + m11 * a1;
  }
}

void apply_controlled(ComplexVec& amps, int n, const Gate& g) {
  const std::size_t cmask = qubit_mask(n, g.targets[0]);
  const std::size_t m = g.targets.size() - 1;
  const std::size_t d = std::size_t{1} << m;
  std::vector<std::size_t> tmasks(m);
  std::size_t all_t = 0;
  for (std::size_t k = 0; k < m; ++k) {
    tmasks[k] = qubit_mask(n, g.targets[k + 1]);
    all_t |= tmasks[k];
  }
  // Offsets of each local basis state |j> of the target register.
  std::vector<std::size_t> offs(d, 0);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < m; ++k)
      if (j & (std::size_t{1} << (m - 1 - k))) offs[j] |= tmasks[k];
  const ComplexMatrix& u = *g.unitary;
  ComplexVec local(d), out(d);
  for (std::size_t base = 0; base < amps.size(); ++base) {
    if (!(base & cmask) || (base & all_t)) continue;
    for (std::size_t j = 0; j < d; ++j) local[j] = amps[base | offs[j]];
    for (std::size_t i = 0; i < d; ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += u(i, j) * local[j];
      out[i] = s;
    }
    for (std::size_t j = 0; j < d; ++j) amps[base | offs[j]] = out[j];
  }
}

void apply_inplace(ComplexVec& amps, int n, const Gate& g, double angle) {
  switch (g.kind) {
    case GateKind::CNOT: {
      const std::size_t cm = qubit_mask(n, g.targets[0]), tm = qubit_mask(n, g.targets[1]);
      for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & cm) && !(i & tm)) std::swap(amps[i], amps[i | tm]);
      return;
    }
    case GateKind::CZ: {
      const std::size_t both = qubit_mask(n, g.targets[0]) | qubit_mask(n, g.targets[1]);
      for (std::size_t i = 0; i < amps.size(); ++i)
        if ((i & both) == both) amps[i] = -amps[i];
      return;
    }
    case GateKind::ControlledUnitary:
      apply_controlled(amps, n, g);
      return;
    default:
      apply_1q(amps, n, g.targets[0], single_qubit_matrix(g.kind, angle));
  }
}

ComplexVec simulate(const ParamCircuit& c, ComplexVec amps, std::span<const double> params,
                    std::size_t shifted_gate, double shift) {
  const auto& gates = c.gates();
  for (std::size_t k = 0; k < gates.size(); ++k) {
    double angle = is_rotation(gates[k].kind) ? gates[k].angle(params) : 0.0;
    if (k == shifted_gate) angle += shift;
    apply_inplace(amps, c.n_qubits(), gates[k], angle);
  }
  return amps;
}

void check_run_args(const ParamCircuit& c, const StateVector& psi0, std::span<const double> params) {
  if (psi0.n_qubits() != c.n_qubits()) {
    throw std::invalid_argument("run_circuit: state has " + std::to_string(psi0.n_qubits()) +
                                " qubits, circuit has " + std::to_string(c.n_qubits()));
  }
  if (params.size() != c.n_params()) {
    throw std::invalid_argument("run_circuit: expected " + std::to_string(c.n_params()) +
                                " parameters, got " + std::to_string(params.size()));
  }
}

constexpr std::size_t kNoShift = static_cast<std::size_t>(-1);

}  // namespace

StateVector apply_gate(const StateVector& psi, const Gate& g, std::span<const double> params) {
  validate_gate(g, psi.n_qubits());
  const double angle = is_rotation(g.kind) ? g.angle(params) : 0.0;
  ComplexVec amps = psi.vec();
  apply_inplace(amps, psi.n_qubits(), g, angle);
  return StateVector::from_amplitudes(std::move(amps), 1e-10);
}

StateVector run_circuit(const ParamCircuit& c, const StateVector& psi0, std::span<const double> params) {
  check_run_args(c, psi0, params);
  return StateVector::from_amplitudes(simulate(c, psi0.vec(), params, kNoShift, 0.0), 1e-10);
}

StateVector run_circuit_shifted(const ParamCircuit& c, const StateVector& psi0,
                                std::span<const double> params, std::size_t gate_index,
                                double angle_shift) {
  check_run_args(c, psi0, params);
  if (gate_index >= c.size()) throw std::out_of_range("run_circuit_shifted: gate index out of range");
  return StateVector::from_amplitudes(simulate(c, psi0.vec(), params, gate_index, angle_shift), 1e-10);
}

ComplexMatrix circuit_unitary(const ParamCircuit& c, std::span<const double> params) {
  if (c.n_qubits() > 10) throw std::invalid_argument("circuit_unitary: more than 10 qubits");
  if (params.size() != c.n_params()) throw std::invalid_argument("circuit_unitary: parameter count mismatch");
  const std::size_t d = std::size_t{1} << c.n_qubits();
  ComplexMatrix u(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    ComplexVec col(d);
    col[j] = 1.0;
    col = simulate(c, std::move(col), params, kNoShift, 0.0);
    for (std::size_t i = 0; i < d; ++i) u(i, j) = col[i];
  }
  return u;
}

std::vector<Gate> vw_block(int q0, int q1, std::array<std::size_t, 3> refs) {
  if (q0 == q1) throw std::invalid_argument("vw_block: duplicate qubit");
  const auto [a, b, g] = refs;
  // Parameter coefficients carry the sign that yields exp(-i(...)); the
  // +-pi/2 offsets are constants.
  return {
      Gate::fixed(GateKind::RZ, q1, -pi / 2),
      Gate::cnot(q1, q0),
      Gate::param(GateKind::RZ, q0, g, 2.0, pi / 2),
      Gate::param(GateKind::RY, q1, a, -2.0, -pi / 2),
      Gate::cnot(q0, q1),
      Gate::param(GateKind::RY, q1, b, 2.0, pi / 2),
      Gate::cnot(q1, q0),
      Gate::fixed(GateKind::RZ, q0, pi / 2),
  };
}

std::vector<Gate> mixing_layer(int n_qubits, std::span<const std::size_t> refs) {
  if (n_qubits < 2) throw std::invalid_argument("mixing_layer: need at least 2 qubits");
  if (refs.size() != static_cast<std::size_t>(n_qubits)) {
    throw std::invalid_argument("mixing_layer: need one parameter per qubit");
  }
  std::vector<Gate> out;
  for (int q = 0; q < n_qubits; ++q) out.push_back(Gate::h(q));
  for (int q = 0; q + 1 < n_qubits; ++q) out.push_back(Gate::cz(q, q + 1));
  for (int q = 0; q < n_qubits; ++q) out.push_back(Gate::param(GateKind::RX, q, refs[q]));
  return out;
}

std::vector<std::array<int, 2>> brick_pairs(int n_qubits) {
  std::vector<std::array<int, 2>> pairs;
  for (int start : {0, 1})
    for (int q = start; q + 1 < n_qubits; q += 2) pairs.push_back({q, q + 1});
  return pairs;
}

std::size_t ansatz_param_count(int n_qubits, int n_layers) {
  return static_cast<std::size_t>(n_layers) * (3 * brick_pairs(n_qubits).size() + n_qubits);
}

ParamCircuit build_ansatz(int n_qubits, int n_layers) {
  if (n_qubits < 2 || n_qubits > kMaxQubits) throw std::invalid_argument("build_ansatz: need 2..12 qubits");
  if (n_layers < 1) throw std::invalid_argument("build_ansatz: need at least one layer");
  ParamCircuit c(n_qubits, 0);
  for (int layer = 0; layer < n_layers; ++layer) {
    for (const auto& [a, b] : brick_pairs(n_qubits)) {
      const std::size_t p = c.add_params(3);
      c.add(vw_block(a, b, {p, p + 1, p + 2}));
    }
    std::vector<std::size_t> refs(n_qubits);
    const std::size_t p = c.add_params(n_qubits);
    for (int q = 0; q < n_qubits; ++q) refs[q] = p + q;
    c.add(mixing_layer(n_qubits, refs));
  }
  return c;
}

std::string dump(const ParamCircuit& c) {
  std::ostringstream os;
  char buf[64];
  os << "# qubits=" << c.n_qubits() << " params=" << c.n_params() << "\n";
  for (const auto& g : c.gates()) {
    os << to_string(g.kind);
    for (int t : g.targets) os << ' ' << t;
    if (g.param_ref) {
      os << " p" << *g.param_ref;
      if (g.scale != 1.0) {
        std::snprintf(buf, sizeof buf, " scale=%.17g", g.scale);
        os << buf;
      }
      if (g.offset != 0.0) {
        std::snprintf(buf, sizeof buf, " offset=%.17g", g.offset);
        os << buf;
      }
    } else if (g.fixed_angle) {
      std::snprintf(buf, sizeof buf, " %.17g", *g.fixed_angle);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace qdiff::circuit
