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

#include "qdiff/measure.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "qdiff/io.hpp"

namespace qdiff::measure {

using circuit::GateKind;
using std::numbers::pi;

AdaptiveObservable AdaptiveObservable::zeros(std::size_t dim) {
  return {dim, std::vector<double>(dim * dim), std::vector<double>(dim * dim)};
}

AdaptiveObservable AdaptiveObservable::random(std::size_t dim, Rng& rng) {
  const double bound = 1.0 / static_cast<double>(dim);
  std::uniform_real_distribution<double> u(-bound, bound);
  auto obs = zeros(dim);
  for (auto& v : obs.m_real) v = u(rng);
  for (auto& v : obs.m_imag) v = u(rng);
  return obs;
}

AdaptiveObservable AdaptiveObservable::from_matrix(const ComplexMatrix& m) {
  if (!m.square()) throw std::invalid_argument("AdaptiveObservable: matrix is not square");
  auto obs = zeros(m.rows());
  for (std::size_t k = 0; k < m.data().size(); ++k) {
    obs.m_real[k] = m.data()[k].real();
    obs.m_imag[k] = m.data()[k].imag();
  }
  return obs;
}

ObservableBank ObservableBank::random(std::size_t k, std::size_t dim, Rng& rng) {
  ObservableBank bank;
  for (std::size_t i = 0; i < k; ++i) bank.observables.push_back(AdaptiveObservable::random(dim, rng));
  return bank;
}

void ObservableBank::validate() const {
  if (observables.empty()) throw std::invalid_argument("ObservableBank: needs at least one observable");
  for (const auto& o : observables) {
    if (o.dim != dim() || o.m_real.size() != o.dim * o.dim || o.m_imag.size() != o.dim * o.dim) {
      throw std::invalid_argument("ObservableBank: inconsistent observable dimensions");
    }
  }
}

ComplexMatrix hermitize(const AdaptiveObservable& obs) {
  const std::size_t d = obs.dim;
  ComplexMatrix h(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const cplx mij(obs.m_real[i * d + j], obs.m_imag[i * d + j]);
      const cplx mji(obs.m_real[j * d + i], obs.m_imag[j * d + i]);
      h(i, j) = 0.5 * (mij + std::conj(mji));
    }
  return h;
}

double expectation(const StateVector& psi, const ComplexMatrix& h) {
  if (h.rows() != psi.dim() || h.cols() != psi.dim()) {
    throw std::invalid_argument("expectation: observable is " + std::to_string(h.rows()) +
                                "-dimensional, state is " + std::to_string(psi.dim()));
  }
  const cplx v = inner(psi.amps(), matvec(h, psi.amps()));
  double scale = 1.0;
  for (const auto& z : h.data()) scale = std::max(scale, std::abs(z));
  if (std::abs(v.imag()) > 1e-10 * scale) {
    throw std::runtime_error("expectation: imaginary residue " + std::to_string(v.imag()));
  }
  return v.real();
}

double expectation(const StateVector& psi, const AdaptiveObservable& obs) {
  return expectation(psi, hermitize(obs));
}

std::vector<double> ano_features(const StateVector& psi, const ObservableBank& bank) {
  bank.validate();
  if (bank.dim() != psi.dim()) throw std::invalid_argument("ano_features: dimension mismatch");
  std::vector<double> y;
  y.reserve(bank.size());
  for (const auto& obs : bank.observables) y.push_back(expectation(psi, obs));
  return y;
}

ComplexMatrix overlap_operator(const GlobalProbe& probe) {
  const auto u = circuit::circuit_unitary(probe.circuit, probe.params);
  auto h = u + u.adjoint();
  h *= 0.5;
  return h;
}

double overlap_real(const StateVector& psi, const GlobalProbe& probe) {
  if (probe.circuit.n_qubits() != psi.n_qubits()) throw std::invalid_argument("overlap_real: dimension mismatch");
  const auto u_psi = circuit::run_circuit(probe.circuit, psi, probe.params);
  return inner(psi.amps(), u_psi.amps()).real();
}

double hadamard_test(const StateVector& psi, const GlobalProbe& probe) {
  const int n = psi.n_qubits();
  if (probe.circuit.n_qubits() != n) throw std::invalid_argument("hadamard_test: dimension mismatch");
  // Ancilla is qubit 0 of the enlarged register, so |0>_a (x) |psi> keeps psi's amplitudes in the low half.
  ComplexVec amps(psi.dim() * 2);
  std::copy(psi.amps().begin(), psi.amps().end(), amps.begin());
  auto state = StateVector::from_amplitudes(std::move(amps));

  std::vector<int> sys(n);
  for (int q = 0; q < n; ++q) sys[q] = q + 1;
  circuit::ParamCircuit test(n + 1, 0);
  test.add(circuit::Gate::h(0));
  test.add(circuit::Gate::controlled(0, sys, circuit::circuit_unitary(probe.circuit, probe.params)));
  test.add(circuit::Gate::h(0));
  state = circuit::run_circuit(test, state, {});

  double z = 0.0;
  const std::size_t half = psi.dim();
  for (std::size_t i = 0; i < state.dim(); ++i) z += (i < half ? 1.0 : -1.0) * std::norm(state[i]);
  return z;
}

ObservableGradient grad_expectation_wrt_observable(const StateVector& psi) {
  const std::size_t d = psi.dim();
  ObservableGradient g{std::vector<double>(d * d), std::vector<double>(d * d)};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const cplx w = std::conj(psi[i]) * psi[j];
      g.d_real[i * d + j] = w.real();
      g.d_imag[i * d + j] = -w.imag();
    }
  return g;
}

std::vector<ObservableGradient> grad_features_wrt_observables(const StateVector& psi,
                                                              const ObservableBank& bank) {
  bank.validate();
  if (bank.dim() != psi.dim()) throw std::invalid_argument("grad_features_wrt_observables: dimension mismatch");
  return std::vector<ObservableGradient>(bank.size(), grad_expectation_wrt_observable(psi));
}

namespace {

void check_shift_supported(const circuit::Gate& g) {
  if (g.param_ref && !circuit::is_rotation(g.kind)) {
    throw std::invalid_argument(std::string("parameter shift: unsupported parameterized gate ") +
                                std::string(circuit::to_string(g.kind)));
  }
}

// Shift rule over every parameterized gate occurrence. `eval` maps a shifted
// state to a vector of scalars; result[j][p] accumulates d(scalar_j)/d(param p).
template <class Eval>
std::vector<std::vector<double>> shift_jacobian(const circuit::ParamCircuit& c, const StateVector& psi0,
                                                std::span<const double> params, std::size_t n_out,
                                                Eval&& eval) {
  std::vector<std::vector<double>> jac(n_out, std::vector<double>(c.n_params()));
  const auto& gates = c.gates();
  for (std::size_t k = 0; k < gates.size(); ++k) {
    check_shift_supported(gates[k]);
    if (!gates[k].param_ref) continue;
    const auto plus = eval(circuit::run_circuit_shifted(c, psi0, params, k, pi / 2));
    const auto minus = eval(circuit::run_circuit_shifted(c, psi0, params, k, -pi / 2));
    for (std::size_t j = 0; j < n_out; ++j)
      jac[j][*gates[k].param_ref] += gates[k].scale * 0.5 * (plus[j] - minus[j]);
  }
  return jac;
}

}  // namespace

std::vector<double> grad_expectation_wrt_circuit(const circuit::ParamCircuit& c, const StateVector& psi0,
                                                 std::span<const double> params, const ComplexMatrix& h) {
  auto jac = shift_jacobian(c, psi0, params, 1, [&](const StateVector& s) {
    return std::vector<double>{expectation(s, h)};
  });
  return std::move(jac.front());
}

std::vector<std::vector<double>> grad_features_wrt_circuit(const circuit::ParamCircuit& c,
                                                           const StateVector& psi0,
                                                           std::span<const double> params,
                                                           const ObservableBank& bank) {
  bank.validate();
  std::vector<ComplexMatrix> hs;
  for (const auto& o : bank.observables) hs.push_back(hermitize(o));
  return shift_jacobian(c, psi0, params, hs.size(), [&](const StateVector& s) {
    std::vector<double> y;
    for (const auto& h : hs) y.push_back(expectation(s, h));
    return y;
  });
}

std::vector<double> grad_overlap_wrt_probe(const StateVector& psi, const GlobalProbe& probe) {
  const auto& c = probe.circuit;
  if (c.n_qubits() != psi.n_qubits()) throw std::invalid_argument("grad_overlap_wrt_probe: dimension mismatch");
  std::vector<double> grad(c.n_params());
  const auto& gates = c.gates();
  auto f = [&](std::size_t k, double shift) {
    return inner(psi.amps(), circuit::run_circuit_shifted(c, psi, probe.params, k, shift).amps()).real();
  };
  for (std::size_t k = 0; k < gates.size(); ++k) {
    check_shift_supported(gates[k]);
    if (!gates[k].param_ref) continue;
    double d;
    if (gates[k].kind == GateKind::Phase) {
      d = 0.5 * (f(k, pi / 2) - f(k, -pi / 2));
    } else {
      d = 0.25 * (f(k, pi) - f(k, -pi));
    }
    grad[*gates[k].param_ref] += gates[k].scale * d;
  }
  return grad;
}

void save_bank(const ObservableBank& bank, const std::filesystem::path& path) {
  bank.validate();
  io::ByteWriter w;
  w.put<std::uint64_t>(bank.size());
  w.put<std::uint64_t>(bank.dim());
  for (const auto& o : bank.observables) {
    w.f64s(o.m_real);
    w.f64s(o.m_imag);
  }
  io::write_file_atomic(path, w.str());
}

ObservableBank load_bank(const std::filesystem::path& path) {
  const auto data = io::read_file(path);
  io::ByteReader r(data);
  const auto k = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  if (k == 0 || d == 0 || d > (1u << kMaxQubits)) throw io::FormatError("observable bank: bad header");
  if (r.remaining() != k * d * d * 2 * sizeof(double)) throw io::FormatError("observable bank: size mismatch");
  ObservableBank bank;
  for (std::uint64_t i = 0; i < k; ++i) {
    auto o = AdaptiveObservable::zeros(d);
    r.f64s(o.m_real);
    r.f64s(o.m_imag);
    bank.observables.push_back(std::move(o));
  }
  return bank;
}

std::string bank_to_json(const ObservableBank& bank) {
  bank.validate();
  nlohmann::json j;
  j["K"] = bank.size();
  j["D"] = bank.dim();
  auto& obs = j["observables"] = nlohmann::json::array();
  for (const auto& o : bank.observables) obs.push_back({{"real", o.m_real}, {"imag", o.m_imag}});
  return j.dump();
}

ObservableBank bank_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto k = j.at("K").get<std::size_t>();
  const auto d = j.at("D").get<std::size_t>();
  ObservableBank bank;
  for (const auto& o : j.at("observables")) {
    AdaptiveObservable a{d, o.at("real").get<std::vector<double>>(), o.at("imag").get<std::vector<double>>()};
    bank.observables.push_back(std::move(a));
  }
  if (bank.size() != k) throw io::FormatError("observable bank: K does not match observable count");
  bank.validate();
  return bank;
}

}  // namespace qdiff::measure
