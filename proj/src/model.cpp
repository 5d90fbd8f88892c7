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

#include "qdiff/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "qdiff/encode.hpp"
#include "qdiff/io.hpp"
#include "qdiff/parallel.hpp"
#include "qdiff/rng.hpp"

namespace qdiff::model {

using std::numbers::pi;

namespace {

constexpr char kCheckpointMagic[] = "QDIFFCKP";
constexpr std::uint32_t kCheckpointVersion = 1;

void fill_uniform(std::vector<double>& v, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& x : v) x = u(rng);
}

void fill_angles(std::vector<double>& v, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2 * pi);
  for (auto& x : v) x = u(rng);
}

cplx modrelu(cplx z, double tau) {
  if (tau == 0.0) return z;
  const double r = std::abs(z);
  return r > tau ? z * (1.0 - tau / r) : cplx(0.0);
}

cplx modrelu_grad(cplx z, cplx g, double tau) {
  if (tau == 0.0) return g;
  const double r = std::abs(z);
  if (r <= tau) return 0.0;
  const cplx u = z / r;
  return g - (tau / r) * (g - u * (std::conj(u) * g).real());
}

double leaky(double x, double slope) { return x > 0 ? x : slope * x; }
double leaky_grad(double x, double slope) { return x > 0 ? 1.0 : slope; }

ComplexVec affine(const ComplexAffine& l, std::span<const cplx> x) {
  ComplexVec y(l.out);
  for (std::size_t i = 0; i < l.out; ++i) {
    const double* wr = &l.w_real[i * l.in];
    const double* wi = &l.w_imag[i * l.in];
    double re = l.b_real[i], im = l.b_imag[i];
    for (std::size_t j = 0; j < l.in; ++j) {
      re += wr[j] * x[j].real() - wi[j] * x[j].imag();
      im += wr[j] * x[j].imag() + wi[j] * x[j].real();
    }
    y[i] = {re, im};
  }
  return y;
}

std::vector<double> affine(const RealAffine& l, std::span<const double> x) {
  std::vector<double> y(l.out);
  for (std::size_t i = 0; i < l.out; ++i) {
    const double* w = &l.w[i * l.in];
    double s = l.b[i];
    for (std::size_t j = 0; j < l.in; ++j) s += w[j] * x[j];
    y[i] = s;
  }
  return y;
}

struct EncoderTrace {
  std::vector<ComplexVec> ins, pres;
  ComplexVec z;
};

EncoderTrace run_encoder(const HybridModel& m, std::span<const double> input) {
  EncoderTrace tr;
  ComplexVec x(input.begin(), input.end());
  for (std::size_t l = 0; l < m.encoder.size(); ++l) {
    auto pre = affine(m.encoder[l], x);
    tr.ins.push_back(std::move(x));
    if (l + 1 < m.encoder.size()) {
      x.resize(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i) x[i] = modrelu(pre[i], m.hyper.modrelu_tau);
    } else {
      tr.z = pre;
    }
    tr.pres.push_back(std::move(pre));
  }
  return tr;
}

// g_z = d loss / d Re z + i d loss / d Im z.
void encoder_backward(const HybridModel& m, const EncoderTrace& tr, ComplexVec g, HybridModel& grad) {
  for (std::size_t l = m.encoder.size(); l-- > 0;) {
    if (l + 1 < m.encoder.size()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = modrelu_grad(tr.pres[l][i], g[i], m.hyper.modrelu_tau);
    }
    const auto& layer = m.encoder[l];
    auto& gl = grad.encoder[l];
    const auto& x = tr.ins[l];
    ComplexVec gx(layer.in, 0.0);
    for (std::size_t i = 0; i < layer.out; ++i) {
      const cplx gi = g[i];
      gl.b_real[i] += gi.real();
      gl.b_imag[i] += gi.imag();
      if (gi == cplx(0.0)) continue;
      double* gwr = &gl.w_real[i * layer.in];
      double* gwi = &gl.w_imag[i * layer.in];
      const double* wr = &layer.w_real[i * layer.in];
      const double* wi = &layer.w_imag[i * layer.in];
      for (std::size_t j = 0; j < layer.in; ++j) {
        const cplx gw = gi * std::conj(x[j]);
        gwr[j] += gw.real();
        gwi[j] += gw.imag();
        if (l > 0) gx[j] += cplx(wr[j], -wi[j]) * gi;
      }
    }
    g = std::move(gx);
  }
}

// Gradient w.r.t. an unnormalized vector z given the gradient w.r.t. z/|z|.
ComplexVec normalize_backward(std::span<const cplx> psi0, double norm, std::span<const cplx> g_psi) {
  const double proj = inner(psi0, g_psi).real();
  ComplexVec g(psi0.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g_psi[i] - psi0[i] * proj) / norm;
  return g;
}

void require_finite(std::span<const double> v, Group g) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::runtime_error("model: non-finite value in " + std::string(to_string(g)) + " stage");
}

void require_finite(std::span<const cplx> v, Group g) {
  for (const auto& x : v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
      throw std::runtime_error("model: non-finite value in " + std::string(to_string(g)) + " stage");
}

StateVector latent_state(const HybridModel& m, std::span<const cplx> z) {
  try {
    return encode::encode_amplitude(z, m.hyper.n_qubits);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("encoder produced an all-zero or invalid latent: ") + e.what());
  }
}

std::vector<std::span<double>> tensors(HybridModel& m) {
  std::vector<std::span<double>> out;
  for_each_tensor(m, [&](Group, std::span<double> s) { out.push_back(s); });
  return out;
}

std::vector<std::span<const double>> tensors(const HybridModel& m) {
  std::vector<std::span<const double>> out;
  for_each_tensor(m, [&](Group, std::span<const double> s) { out.push_back(s); });
  return out;
}

void add_into(HybridModel& dst, const HybridModel& src) {
  auto d = tensors(dst);
  const auto s = tensors(src);
  for (std::size_t k = 0; k < d.size(); ++k)
    for (std::size_t i = 0; i < d[k].size(); ++i) d[k][i] += s[k][i];
}

void scale(HybridModel& m, double s) {
  for (auto t : tensors(m))
    for (auto& x : t) x *= s;
}

void write_hyper(io::ByteWriter& w, const Hyper& h) {
  w.put<std::int32_t>(h.n_qubits);
  w.put<std::uint64_t>(h.n_observables);
  w.put<std::int32_t>(h.layers);
  w.put<std::int32_t>(h.probe_layers);
  w.put<std::uint64_t>(h.steps);
  w.put<double>(h.beta_start);
  w.put<double>(h.beta_end);
  w.put<std::uint64_t>(h.input_dim);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.encoder_hidden.size()));
  for (auto d : h.encoder_hidden) w.put<std::uint64_t>(d);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.decoder_hidden.size()));
  for (auto d : h.decoder_hidden) w.put<std::uint64_t>(d);
  w.put<double>(h.modrelu_tau);
  w.put<double>(h.leaky_slope);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(h.target));
  w.put<std::uint8_t>(h.ablate_quantum ? 1 : 0);
}

Hyper read_hyper(io::ByteReader& r) {
  Hyper h;
  h.n_qubits = r.get<std::int32_t>();
  h.n_observables = r.get<std::uint64_t>();
  h.layers = r.get<std::int32_t>();
  h.probe_layers = r.get<std::int32_t>();
  h.steps = r.get<std::uint64_t>();
  h.beta_start = r.get<double>();
  h.beta_end = r.get<double>();
  h.input_dim = r.get<std::uint64_t>();
  const auto read_dims = [&] {
    const auto n = r.get<std::uint32_t>();
    if (n > 64) throw io::FormatError("checkpoint: implausible layer count");
    std::vector<std::size_t> dims(n);
    for (auto& d : dims) d = r.get<std::uint64_t>();
    return dims;
  };
  h.encoder_hidden = read_dims();
  h.decoder_hidden = read_dims();
  h.modrelu_tau = r.get<double>();
  h.leaky_slope = r.get<double>();
  const auto target = r.get<std::uint8_t>();
  if (target > 2) throw io::FormatError("checkpoint: unknown target mode");
  h.target = static_cast<Target>(target);
  h.ablate_quantum = r.get<std::uint8_t>() != 0;
  return h;
}

}  // namespace

ComplexAffine ComplexAffine::zeros(std::size_t in, std::size_t out) {
  return {in, out, std::vector<double>(in * out, 0.0), std::vector<double>(in * out, 0.0),
          std::vector<double>(out, 0.0), std::vector<double>(out, 0.0)};
}

RealAffine RealAffine::zeros(std::size_t in, std::size_t out) {
  return {in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
}

std::string_view to_string(Target t) {
  switch (t) {
    case Target::PrevSample: return "prev";
    case Target::Noise: return "noise";
    case Target::Clean: return "clean";
  }
  return "?";
}

Target target_from_string(std::string_view s) {
  if (s == "prev") return Target::PrevSample;
  if (s == "noise") return Target::Noise;
  if (s == "clean") return Target::Clean;
  throw std::invalid_argument("unknown target mode '" + std::string(s) + "' (expected prev, noise or clean)");
}

std::string_view to_string(Group g) {
  switch (g) {
    case Group::Encoder: return "encoder";
    case Group::Circuit: return "circuit";
    case Group::Observables: return "observables";
    case Group::Probe: return "probe";
    case Group::Decoder: return "decoder";
  }
  return "?";
}

void Hyper::validate() const {
  if (n_qubits < 1 || n_qubits > 10) throw std::invalid_argument("model: n_qubits must be in [1, 10]");
  if (n_observables < 1) throw std::invalid_argument("model: need at least one observable");
  if (layers < 1 || probe_layers < 1) throw std::invalid_argument("model: layer counts must be >= 1");
  if (steps < 1) throw std::invalid_argument("model: T must be >= 1");
  if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end))
    throw std::invalid_argument("model: need 0 < beta_start <= beta_end < 1");
  if (input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
  for (auto d : encoder_hidden)
    if (d < 1) throw std::invalid_argument("model: hidden widths must be >= 1");
  for (auto d : decoder_hidden)
    if (d < 1) throw std::invalid_argument("model: hidden widths must be >= 1");
  if (!(modrelu_tau >= 0)) throw std::invalid_argument("model: modrelu tau must be >= 0");
  if (!(leaky_slope >= 0 && leaky_slope < 1)) throw std::invalid_argument("model: leaky slope must be in [0, 1)");
}

HybridModel HybridModel::init(const Hyper& hyper, std::uint64_t seed) {
  hyper.validate();
  HybridModel m;
  m.hyper = hyper;
  auto rng = substream(seed);
  std::vector<std::size_t> enc_dims{hyper.input_dim + 1};
  enc_dims.insert(enc_dims.end(), hyper.encoder_hidden.begin(), hyper.encoder_hidden.end());
  enc_dims.push_back(hyper.latent_dim());
  for (std::size_t l = 0; l + 1 < enc_dims.size(); ++l) {
    auto layer = ComplexAffine::zeros(enc_dims[l], enc_dims[l + 1]);
    const double b = 1.0 / std::sqrt(double(layer.in));
    fill_uniform(layer.w_real, b, rng);
    fill_uniform(layer.w_imag, b, rng);
    fill_uniform(layer.b_real, b, rng);
    fill_uniform(layer.b_imag, b, rng);
    m.encoder.push_back(std::move(layer));
  }
  m.ansatz = circuit::build_ansatz(hyper.n_qubits, hyper.layers);
  m.theta.resize(m.ansatz.n_params());
  fill_angles(m.theta, rng);
  m.bank = measure::ObservableBank::random(hyper.n_observables, hyper.latent_dim(), rng);
  m.probe.circuit = circuit::build_ansatz(hyper.n_qubits, hyper.probe_layers);
  m.probe.params.resize(m.probe.circuit.n_params());
  fill_angles(m.probe.params, rng);
  std::vector<std::size_t> dec_dims{hyper.feature_dim() + hyper.input_dim};
  dec_dims.insert(dec_dims.end(), hyper.decoder_hidden.begin(), hyper.decoder_hidden.end());
  dec_dims.push_back(hyper.input_dim);
  for (std::size_t l = 0; l + 1 < dec_dims.size(); ++l) {
    auto layer = RealAffine::zeros(dec_dims[l], dec_dims[l + 1]);
    const double b = 1.0 / std::sqrt(double(layer.in));
    fill_uniform(layer.w, b, rng);
    fill_uniform(layer.b, b, rng);
    m.decoder.push_back(std::move(layer));
  }
  return m;
}

HybridModel HybridModel::zeros_like() const {
  HybridModel z = *this;
  for (auto t : tensors(z)) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

diffusion::NoiseSchedule HybridModel::schedule() const {
  return diffusion::linear_schedule(hyper.steps, hyper.beta_start, hyper.beta_end);
}

std::size_t HybridModel::n_params() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](Group, std::span<const double> s) { n += s.size(); });
  return n;
}

void HybridModel::validate() const {
  hyper.validate();
  const auto D = hyper.latent_dim();
  if (encoder.empty() || encoder.front().in != hyper.input_dim + 1 || encoder.back().out != D)
    throw std::invalid_argument("model: encoder shape does not match hyperparameters");
  for (std::size_t l = 0; l + 1 < encoder.size(); ++l)
    if (encoder[l].out != encoder[l + 1].in) throw std::invalid_argument("model: encoder layers do not chain");
  for (const auto& l : encoder)
    if (l.w_real.size() != l.in * l.out || l.w_imag.size() != l.in * l.out || l.b_real.size() != l.out ||
        l.b_imag.size() != l.out)
      throw std::invalid_argument("model: encoder tensor sizes inconsistent");
  if (ansatz.n_qubits() != hyper.n_qubits || theta.size() != ansatz.n_params())
    throw std::invalid_argument("model: ansatz does not match theta");
  bank.validate();
  if (bank.size() != hyper.n_observables || bank.dim() != D)
    throw std::invalid_argument("model: observable bank shape mismatch");
  if (probe.circuit.n_qubits() != hyper.n_qubits || probe.params.size() != probe.circuit.n_params())
    throw std::invalid_argument("model: probe does not match its parameters");
  if (decoder.empty() || decoder.front().in != hyper.feature_dim() + hyper.input_dim ||
      decoder.back().out != hyper.input_dim)
    throw std::invalid_argument("model: decoder shape does not match hyperparameters");
  for (std::size_t l = 0; l + 1 < decoder.size(); ++l)
    if (decoder[l].out != decoder[l + 1].in) throw std::invalid_argument("model: decoder layers do not chain");
  for (const auto& l : decoder)
    if (l.w.size() != l.in * l.out || l.b.size() != l.out)
      throw std::invalid_argument("model: decoder tensor sizes inconsistent");
  for_each_tensor(*this, [](Group g, std::span<const double> s) {
    for (double x : s)
      if (!std::isfinite(x)) throw std::invalid_argument("model: non-finite parameter in " + std::string(to_string(g)));
  });
}

std::vector<double> flatten(const HybridModel& m) {
  std::vector<double> out;
  out.reserve(m.n_params());
  for_each_tensor(m, [&](Group, std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

void unflatten(HybridModel& m, std::span<const double> flat) {
  if (flat.size() != m.n_params()) throw std::invalid_argument("unflatten: size mismatch");
  std::size_t pos = 0;
  for_each_tensor(m, [&](Group, std::span<double> s) {
    std::copy(flat.begin() + pos, flat.begin() + pos + s.size(), s.begin());
    pos += s.size();
  });
}

std::array<std::pair<std::size_t, std::size_t>, 5> group_ranges(const HybridModel& m) {
  std::array<std::pair<std::size_t, std::size_t>, 5> r{};
  std::array<bool, 5> seen{};
  std::size_t pos = 0;
  for_each_tensor(m, [&](Group g, std::span<const double> s) {
    const auto k = static_cast<std::size_t>(g);
    if (!seen[k]) r[k].first = pos;
    seen[k] = true;
    pos += s.size();
    r[k].second = pos;
  });
  return r;
}

std::vector<double> encoder_input(const HybridModel& m, std::span<const double> x, std::size_t t) {
  if (x.size() != m.hyper.input_dim)
    throw std::invalid_argument("model: expected input of length " + std::to_string(m.hyper.input_dim));
  if (t > m.hyper.steps) throw std::out_of_range("model: timestep exceeds T");
  std::vector<double> in(x.begin(), x.end());
  in.push_back(double(t) / double(m.hyper.steps));
  return in;
}

ComplexVec encode_latent(const HybridModel& m, std::span<const double> enc_input) {
  return run_encoder(m, enc_input).z;
}

Trace forward_trace(const HybridModel& m, std::span<const double> x_t, std::size_t t) {
  Trace tr;
  auto enc = run_encoder(m, encoder_input(m, x_t, t));
  tr.enc_in = std::move(enc.ins);
  tr.enc_pre = std::move(enc.pres);
  tr.latent = std::move(enc.z);
  tr.latent_norm = std::sqrt(norm_squared(tr.latent));
  require_finite(tr.latent, Group::Encoder);
  tr.psi0 = latent_state(m, tr.latent);
  tr.psi = circuit::run_circuit(m.ansatz, tr.psi0, m.theta);
  require_finite(tr.psi.amps(), Group::Circuit);
  if (m.hyper.ablate_quantum) {
    tr.features.assign(m.hyper.feature_dim(), 0.0);
  } else {
    tr.features = measure::ano_features(tr.psi, m.bank);
    require_finite(std::span<const double>(tr.features), Group::Observables);
    tr.features.push_back(measure::overlap_real(tr.psi, m.probe));
    require_finite(std::span<const double>(tr.features).last(1), Group::Probe);
  }
  std::vector<double> x = tr.features;
  x.insert(x.end(), x_t.begin(), x_t.end());
  for (std::size_t l = 0; l < m.decoder.size(); ++l) {
    auto pre = affine(m.decoder[l], x);
    tr.dec_in.push_back(std::move(x));
    if (l + 1 < m.decoder.size()) {
      x.resize(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i) x[i] = leaky(pre[i], m.hyper.leaky_slope);
    } else {
      tr.output = pre;
    }
    tr.dec_pre.push_back(std::move(pre));
  }
  require_finite(std::span<const double>(tr.output), Group::Decoder);
  return tr;
}

std::vector<double> forward(const HybridModel& m, std::span<const double> x_t, std::size_t t) {
  return forward_trace(m, x_t, t).output;
}

Example make_example(const HybridModel& m, std::span<const double> x0, std::size_t t, std::span<const double> eps) {
  if (t < 1 || t > m.hyper.steps) throw std::out_of_range("make_example: t must be in [1, T]");
  const auto sched = m.schedule();
  Example ex;
  ex.t = t;
  ex.x_t = diffusion::forward_sample(x0, t, sched, eps).x_t;
  ex.x_prev = diffusion::forward_sample(x0, t - 1, sched, eps).x_t;
  switch (m.hyper.target) {
    case Target::PrevSample: ex.target = ex.x_prev; break;
    case Target::Noise: ex.target.assign(eps.begin(), eps.end()); break;
    case Target::Clean: ex.target.assign(x0.begin(), x0.end()); break;
  }
  return ex;
}

StateVector target_state(const HybridModel& m, std::span<const double> x_prev, std::size_t t) {
  if (t < 1) throw std::out_of_range("target_state: t must be >= 1");
  return latent_state(m, encode_latent(m, encoder_input(m, x_prev, t - 1)));
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("loss: lambda must be in [0, 1]");
}

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("loss: target length mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / double(a.size());
}

}  // namespace

LossParts loss_parts(const HybridModel& m, const Example& ex, double lambda) {
  check_lambda(lambda);
  const auto tr = forward_trace(m, ex.x_t, ex.t);
  LossParts p;
  p.mse = mse(tr.output, ex.target);
  if (lambda > 0) {
    const auto phi = target_state(m, ex.x_prev, ex.t);
    p.infidelity = 1.0 - std::norm(inner(phi.amps(), tr.psi.amps()));
  }
  p.total = (1 - lambda) * p.mse + lambda * p.infidelity;
  return p;
}

double loss(const HybridModel& m, const Example& ex, double lambda) { return loss_parts(m, ex, lambda).total; }

LossParts accumulate_gradient(const HybridModel& m, const Example& ex, double lambda, HybridModel& grad) {
  check_lambda(lambda);
  const auto tr = forward_trace(m, ex.x_t, ex.t);
  LossParts p;
  p.mse = mse(tr.output, ex.target);
  const std::size_t n_out = tr.output.size();

  // Decoder.
  std::vector<double> g(n_out);
  for (std::size_t i = 0; i < n_out; ++i) g[i] = (1 - lambda) * 2.0 * (tr.output[i] - ex.target[i]) / double(n_out);
  for (std::size_t l = m.decoder.size(); l-- > 0;) {
    if (l + 1 < m.decoder.size())
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= leaky_grad(tr.dec_pre[l][i], m.hyper.leaky_slope);
    const auto& layer = m.decoder[l];
    auto& gl = grad.decoder[l];
    const auto& x = tr.dec_in[l];
    std::vector<double> gx(layer.in, 0.0);
    for (std::size_t i = 0; i < layer.out; ++i) {
      const double gi = g[i];
      gl.b[i] += gi;
      if (gi == 0.0) continue;
      double* gw = &gl.w[i * layer.in];
      const double* w = &layer.w[i * layer.in];
      for (std::size_t j = 0; j < layer.in; ++j) {
        gw[j] += gi * x[j];
        gx[j] += w[j] * gi;
      }
    }
    g = std::move(gx);
  }
  const std::size_t K = m.hyper.n_observables;
  const bool features_live = !m.hyper.ablate_quantum;

  // Effective observable on psi = U(theta) psi0 collecting every quantum path.
  const std::size_t D = m.hyper.latent_dim();
  ComplexMatrix obs(D, D);
  bool any = false;
  if (features_live) {
    for (std::size_t k = 0; k < K; ++k) {
      if (g[k] == 0.0) continue;
      obs += measure::hermitize(m.bank.observables[k]) * cplx(g[k]);
      any = true;
    }
    if (g[K] != 0.0) {
      obs += measure::overlap_operator(m.probe) * cplx(g[K]);
      any = true;
    }
  }
  std::optional<StateVector> phi;
  EncoderTrace phi_trace;
  cplx overlap = 0.0;
  if (lambda > 0) {
    phi_trace = run_encoder(m, encoder_input(m, ex.x_prev, ex.t - 1));
    phi = latent_state(m, phi_trace.z);
    overlap = inner(phi->amps(), tr.psi.amps());
    p.infidelity = 1.0 - std::norm(overlap);
    obs += outer_product(*phi).mat() * cplx(-lambda);
    any = true;
  }
  p.total = (1 - lambda) * p.mse + lambda * p.infidelity;

  if (features_live) {
    const auto og = measure::grad_expectation_wrt_observable(tr.psi);
    for (std::size_t k = 0; k < K; ++k) {
      if (g[k] == 0.0) continue;
      auto& go = grad.bank.observables[k];
      for (std::size_t i = 0; i < og.d_real.size(); ++i) {
        go.m_real[i] += g[k] * og.d_real[i];
        go.m_imag[i] += g[k] * og.d_imag[i];
      }
    }
    if (g[K] != 0.0) {
      const auto gp = measure::grad_overlap_wrt_probe(tr.psi, m.probe);
      for (std::size_t i = 0; i < gp.size(); ++i) grad.probe.params[i] += g[K] * gp[i];
    }
  }
  if (!any) return p;

  const auto gt = measure::grad_expectation_wrt_circuit(m.ansatz, tr.psi0, m.theta, obs);
  for (std::size_t i = 0; i < gt.size(); ++i) grad.theta[i] += gt[i];

  // d<psi|O|psi>/d psi0 = 2 U^dagger O U psi0.
  const auto u = circuit::circuit_unitary(m.ansatz, m.theta);
  auto g_psi0 = matvec(u.adjoint(), matvec(obs, tr.psi.amps()));
  for (auto& v : g_psi0) v *= 2.0;
  encoder_backward(m, {tr.enc_in, tr.enc_pre, tr.latent}, normalize_backward(tr.psi0.amps(), tr.latent_norm, g_psi0),
                   grad);

  if (phi) {
    // d(-lambda |<phi|psi>|^2)/d phi = -2 lambda psi conj(<phi|psi>).
    ComplexVec g_phi(D);
    for (std::size_t i = 0; i < D; ++i) g_phi[i] = -2.0 * lambda * tr.psi[i] * std::conj(overlap);
    const double norm = std::sqrt(norm_squared(phi_trace.z));
    encoder_backward(m, phi_trace, normalize_backward(phi->amps(), norm, g_phi), grad);
  }
  return p;
}

LossParts batch_gradient(const HybridModel& m, std::span<const Example> batch, double lambda, int threads,
                         HybridModel& grad) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<HybridModel> slots(batch.size());
  std::vector<LossParts> parts(batch.size());
  std::vector<std::string> errors(batch.size());
  std::vector<char> invalid(batch.size(), 0);
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = m.zeros_like();
      parts[i] = accumulate_gradient(m, batch[i], lambda, slots[i]);
    } catch (const std::invalid_argument& e) {
      errors[i] = e.what();
      invalid[i] = 1;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (errors[i].empty()) continue;
    const std::string msg = "batch index " + std::to_string(i) + ": " + errors[i];
    if (invalid[i]) throw std::invalid_argument(msg);
    throw std::runtime_error(msg);
  }
  grad = m.zeros_like();
  LossParts mean;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    add_into(grad, slots[i]);
    mean.mse += parts[i].mse;
    mean.infidelity += parts[i].infidelity;
    mean.total += parts[i].total;
  }
  const double inv = 1.0 / double(batch.size());
  scale(grad, inv);
  mean.mse *= inv;
  mean.infidelity *= inv;
  mean.total *= inv;
  for_each_tensor(grad, [](Group g, std::span<const double> s) {
    for (double x : s)
      if (!std::isfinite(x)) throw std::runtime_error("non-finite gradient in group " + std::string(to_string(g)));
  });
  return mean;
}

std::vector<GroupAudit> audit_gradients(const HybridModel& m, const Example& ex, double lambda, std::size_t per_group,
                                        std::uint64_t seed, double h, double floor, bool flip_sign) {
  auto grad = m.zeros_like();
  accumulate_gradient(m, ex, lambda, grad);
  const auto analytic = flatten(grad);
  const auto ranges = group_ranges(m);
  HybridModel probe = m;
  auto params = flatten(m);
  auto rng = substream(seed);
  std::vector<GroupAudit> out;
  for (auto g : kGroups) {
    const auto [lo, hi] = ranges[static_cast<std::size_t>(g)];
    GroupAudit a{g, 0, 0.0};
    if (hi > lo) {
      std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
      for (std::size_t k = 0; k < per_group; ++k) {
        const std::size_t i = pick(rng);
        const double orig = params[i];
        params[i] = orig + h;
        unflatten(probe, params);
        const double fp = loss(probe, ex, lambda);
        params[i] = orig - h;
        unflatten(probe, params);
        const double fm = loss(probe, ex, lambda);
        params[i] = orig;
        const double numeric = (fp - fm) / (2 * h);
        const double an = flip_sign ? -analytic[i] : analytic[i];
        if (!std::isfinite(an) || !std::isfinite(numeric)) {
          a.max_rel_err = std::numeric_limits<double>::infinity();
        } else {
          const double err = std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), floor});
          a.max_rel_err = std::max(a.max_rel_err, err);
        }
        ++a.checked;
      }
      unflatten(probe, params);
    }
    out.push_back(a);
  }
  return out;
}

AdamState AdamState::zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& st, const AdamConfig& cfg) {
  if (params.size() != grad.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1 - cfg.beta1) * grad[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= cfg.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.eps);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be finite and >= 0");
  if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("train: lambda must be in [0, 1]");
  if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
}

std::vector<StepLog> train(TrainState& st, const TrainConfig& cfg, const std::vector<std::vector<double>>& dataset,
                           const std::function<void(const StepLog&)>& on_step) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  auto& m = st.model;
  const std::size_t n_params = m.n_params();
  if (st.adam.m.size() != n_params) st.adam = AdamState::zeros(n_params);
  const std::size_t N = dataset.size();
  const std::size_t per_epoch = (N + cfg.batch_size - 1) / cfg.batch_size;
  const AdamConfig adam{cfg.lr};
  std::vector<StepLog> log;
  std::vector<std::size_t> perm;
  std::size_t perm_epoch = SIZE_MAX;
  while (true) {
    const std::uint64_t step = st.adam.step;
    if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
    const std::size_t epoch = step / per_epoch;
    if (epoch >= cfg.epochs) break;
    const auto start = std::chrono::steady_clock::now();
    if (perm_epoch != epoch) {
      perm.resize(N);
      std::iota(perm.begin(), perm.end(), 0);
      auto rng = substream(cfg.seed, {1, epoch});
      std::shuffle(perm.begin(), perm.end(), rng);
      perm_epoch = epoch;
    }
    const std::size_t lo = (step % per_epoch) * cfg.batch_size, hi = std::min(N, lo + cfg.batch_size);
    std::vector<Example> batch;
    for (std::size_t s = 0; s < hi - lo; ++s) {
      const auto& x0 = dataset[perm[lo + s]];
      auto rng = substream(cfg.seed, {2, step, s});
      std::uniform_int_distribution<std::size_t> pick_t(1, m.hyper.steps);
      const std::size_t t = pick_t(rng);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<double> eps(x0.size());
      for (auto& e : eps) e = gauss(rng);
      batch.push_back(make_example(m, x0, t, eps));
    }
    HybridModel grad;
    const auto parts = batch_gradient(m, batch, cfg.lambda, cfg.threads, grad);
    if (!std::isfinite(parts.total)) throw std::runtime_error("train: loss diverged at step " + std::to_string(step + 1));
    auto params = flatten(m);
    adam_step(params, flatten(grad), st.adam, adam);
    for (double x : params)
      if (!std::isfinite(x)) throw std::runtime_error("train: non-finite parameter after step " + std::to_string(step + 1));
    unflatten(m, params);
    StepLog entry{st.adam.step, parts,
                  std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()};
    if (on_step) on_step(entry);
    log.push_back(entry);
  }
  return log;
}

std::pair<double, double> smoothed_endpoints(std::span<const double> losses, std::size_t window) {
  if (losses.empty() || window == 0) throw std::invalid_argument("smoothed_endpoints: empty input");
  const std::size_t w = std::min(window, losses.size());
  const double first = std::accumulate(losses.begin(), losses.begin() + w, 0.0) / double(w);
  const double last = std::accumulate(losses.end() - w, losses.end(), 0.0) / double(w);
  return {first, last};
}

std::vector<std::vector<double>> sample(const HybridModel& m, std::size_t steps, std::uint64_t seed) {
  if (steps > m.hyper.steps) throw std::invalid_argument("sample: more steps than the model's T");
  const auto sched = m.schedule();
  auto rng = substream(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(m.hyper.input_dim);
  for (auto& v : x) v = gauss(rng);
  std::vector<std::vector<double>> traj{x};
  for (std::size_t t = steps; t >= 1; --t) {
    const auto out = forward(m, x, t);
    if (m.hyper.target == Target::PrevSample) {
      x = out;
    } else {
      const double ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar(t - 1);
      for (std::size_t i = 0; i < x.size(); ++i) {
        double x0, eps;
        if (m.hyper.target == Target::Noise) {
          eps = out[i];
          x0 = (x[i] - std::sqrt(1 - ab) * eps) / std::sqrt(ab);
        } else {
          x0 = out[i];
          eps = (x[i] - std::sqrt(ab) * x0) / std::sqrt(1 - ab);
        }
        x[i] = std::sqrt(ab_prev) * x0 + std::sqrt(1 - ab_prev) * eps;
      }
    }
    traj.push_back(x);
  }
  return traj;
}

std::string serialize_checkpoint(const TrainState& st) {
  io::ByteWriter w;
  w.bytes({kCheckpointMagic, 8});
  w.put<std::uint32_t>(kCheckpointVersion);
  write_hyper(w, st.model.hyper);
  w.put<std::uint64_t>(st.adam.step);
  const auto params = flatten(st.model);
  w.put<std::uint64_t>(params.size());
  w.f64s(params);
  const bool has_adam = st.adam.m.size() == params.size();
  w.put<std::uint8_t>(has_adam ? 1 : 0);
  if (has_adam) {
    w.f64s(st.adam.m);
    w.f64s(st.adam.v);
  }
  return w.str();
}

TrainState deserialize_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 12 || r.bytes(8) != std::string_view(kCheckpointMagic, 8))
    throw io::FormatError("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw io::FormatError("checkpoint: unsupported version " + std::to_string(version));
  const Hyper hyper = read_hyper(r);
  try {
    hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw io::FormatError(std::string("checkpoint: invalid hyperparameters: ") + e.what());
  }
  TrainState st;
  st.model = HybridModel::init(hyper, 0);
  const auto step = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  if (n != st.model.n_params()) throw io::FormatError("checkpoint: parameter count does not match hyperparameters");
  std::vector<double> params(n);
  r.f64s(params);
  unflatten(st.model, params);
  st.adam = AdamState::zeros(n);
  st.adam.step = step;
  if (r.get<std::uint8_t>() != 0) {
    r.f64s(st.adam.m);
    r.f64s(st.adam.v);
  }
  if (r.remaining() != 0) throw io::FormatError("checkpoint: trailing bytes");
  try {
    st.model.validate();
  } catch (const std::invalid_argument& e) {
    throw io::FormatError(std::string("checkpoint: ") + e.what());
  }
  return st;
}

void save_checkpoint(const TrainState& st, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(st));
}

TrainState load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(io::read_file(path)); }

}  // namespace qdiff::model
