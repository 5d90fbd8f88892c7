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

// Hybrid encoder / quantum bottleneck / decoder denoiser, its gradients,
// Adam training and the iterative sampler.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdiff/circuit.hpp"
#include "qdiff/diffusion.hpp"
#include "qdiff/measure.hpp"
#include "qdiff/qcore.hpp"

namespace qdiff::model {

/// y = W x + b over complex numbers, stored as separate real/imag parts (row-major out x in).
struct ComplexAffine {
  std::size_t in = 0, out = 0;
  std::vector<double> w_real, w_imag, b_real, b_imag;

  static ComplexAffine zeros(std::size_t in, std::size_t out);
};

struct RealAffine {
  std::size_t in = 0, out = 0;
  std::vector<double> w, b;

  static RealAffine zeros(std::size_t in, std::size_t out);
};

/// What the decoder output is trained to match.
enum class Target { PrevSample, Noise, Clean };
std::string_view to_string(Target t);
Target target_from_string(std::string_view s);

struct Hyper {
  int n_qubits = 4;
  std::size_t n_observables = 16;
  int layers = 2;
  int probe_layers = 1;
  std::size_t steps = 10;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t input_dim = 256;
  std::vector<std::size_t> encoder_hidden{64};
  std::vector<std::size_t> decoder_hidden{256};
  double modrelu_tau = 0.0;
  double leaky_slope = 0.01;
  Target target = Target::PrevSample;
  /// Replace the quantum features by a constant vector (classical ablation).
  bool ablate_quantum = false;

  std::size_t latent_dim() const { return std::size_t{1} << n_qubits; }
  std::size_t feature_dim() const { return n_observables + 1; }
  void validate() const;
};

enum class Group { Encoder, Circuit, Observables, Probe, Decoder };
inline constexpr std::array<Group, 5> kGroups{Group::Encoder, Group::Circuit, Group::Observables, Group::Probe,
                                              Group::Decoder};
std::string_view to_string(Group g);

struct HybridModel {
  Hyper hyper;
  std::vector<ComplexAffine> encoder;
  circuit::ParamCircuit ansatz;
  std::vector<double> theta;
  measure::ObservableBank bank;
  measure::GlobalProbe probe;
  std::vector<RealAffine> decoder;

  /// Uniform +-1/sqrt(fan_in) weights, theta and probe angles in [0, 2pi),
  /// observables uniform in +-1/D.
  static HybridModel init(const Hyper& hyper, std::uint64_t seed);
  /// Same shapes, every trainable scalar zero.
  HybridModel zeros_like() const;

  diffusion::NoiseSchedule schedule() const;
  std::size_t n_params() const;
  void validate() const;
};

/// Visits every trainable tensor in declaration order: encoder layers
/// (w_real, w_imag, b_real, b_imag), theta, observables (m_real, m_imag),
/// probe params, decoder layers (w, b).
template <class Model, class Fn>
void for_each_tensor(Model& m, Fn&& fn) {
  for (auto& l : m.encoder) {
    fn(Group::Encoder, std::span(l.w_real));
    fn(Group::Encoder, std::span(l.w_imag));
    fn(Group::Encoder, std::span(l.b_real));
    fn(Group::Encoder, std::span(l.b_imag));
  }
  fn(Group::Circuit, std::span(m.theta));
  for (auto& o : m.bank.observables) {
    fn(Group::Observables, std::span(o.m_real));
    fn(Group::Observables, std::span(o.m_imag));
  }
  fn(Group::Probe, std::span(m.probe.params));
  for (auto& l : m.decoder) {
    fn(Group::Decoder, std::span(l.w));
    fn(Group::Decoder, std::span(l.b));
  }
}

std::vector<double> flatten(const HybridModel& m);
void unflatten(HybridModel& m, std::span<const double> flat);
/// Flat-index ranges [begin, end) of each group.
std::array<std::pair<std::size_t, std::size_t>, 5> group_ranges(const HybridModel& m);

/// Intermediate values of one forward pass.
struct Trace {
  std::vector<ComplexVec> enc_in;   // input of each encoder layer
  std::vector<ComplexVec> enc_pre;  // affine output of each encoder layer
  ComplexVec latent;                // z
  double latent_norm = 0.0;
  StateVector psi0 = StateVector::zero(1);  // encoded latent
  StateVector psi = StateVector::zero(1);   // after the ansatz
  std::vector<double> features;     // K ANO values then the overlap
  std::vector<std::vector<double>> dec_in;
  std::vector<std::vector<double>> dec_pre;
  std::vector<double> output;
};

/// Encoder input [x_t || t/T].
std::vector<double> encoder_input(const HybridModel& m, std::span<const double> x, std::size_t t);
/// Encoder output z for a given input vector.
ComplexVec encode_latent(const HybridModel& m, std::span<const double> enc_input);

Trace forward_trace(const HybridModel& m, std::span<const double> x_t, std::size_t t);
std::vector<double> forward(const HybridModel& m, std::span<const double> x_t, std::size_t t);

/// One training example. `x_prev` feeds the infidelity target latent at
/// time t-1; `target` is what the decoder regresses onto.
struct Example {
  std::vector<double> x_t;
  std::size_t t = 1;
  std::vector<double> target;
  std::vector<double> x_prev;
};

/// Noises x0 with eps to times t and t-1 and picks the regression target.
Example make_example(const HybridModel& m, std::span<const double> x0, std::size_t t, std::span<const double> eps);

struct LossParts {
  double mse = 0.0;
  double infidelity = 0.0;
  double total = 0.0;
};

/// Target latent state: amplitude encoding of the encoder output on [x_prev || (t-1)/T].
StateVector target_state(const HybridModel& m, std::span<const double> x_prev, std::size_t t);

LossParts loss_parts(const HybridModel& m, const Example& ex, double lambda);
/// (1 - lambda) MSE(forward, target) + lambda (1 - |<phi|psi>|^2).
double loss(const HybridModel& m, const Example& ex, double lambda);

/// Adds d loss / d params of one example into `grad` (shaped like m) and
/// returns the loss parts.
LossParts accumulate_gradient(const HybridModel& m, const Example& ex, double lambda, HybridModel& grad);

/// Mean loss and mean gradient over a batch. Per-example gradients are
/// computed in parallel and summed in index order. Throws, naming the
/// batch index, if any example fails, and names the group of any
/// non-finite gradient.
LossParts batch_gradient(const HybridModel& m, std::span<const Example> batch, double lambda, int threads,
                         HybridModel& grad);

struct GroupAudit {
  Group group = Group::Encoder;
  std::size_t checked = 0;
  double max_rel_err = 0.0;
};

/// Compares the analytic gradient of `loss` against central differences
/// (step h) on `per_group` randomly chosen scalars of each group. Relative
/// error uses max(|a|, |n|, floor) as denominator. `flip_sign` negates the
/// analytic gradient (fault-injection hook).
std::vector<GroupAudit> audit_gradients(const HybridModel& m, const Example& ex, double lambda, std::size_t per_group,
                                        std::uint64_t seed, double h = 1e-5, double floor = 1e-7,
                                        bool flip_sign = false);

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t n);
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& st, const AdamConfig& cfg);

struct TrainConfig {
  std::size_t epochs = 1000;
  /// Stop after this many optimizer steps in total (0 = no limit).
  std::size_t max_steps = 200;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lambda = 0.25;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct StepLog {
  std::uint64_t step = 0;
  LossParts loss;
  double wall_ms = 0.0;
};

struct TrainState {
  HybridModel model;
  AdamState adam;
};

/// Continues training from st.adam.step. Batches come from a per-epoch
/// shuffle of the dataset; t and eps of each slot come from substream(seed,
/// step, slot), so a resumed run reproduces an uninterrupted one exactly.
/// `on_step` is called after every step.
std::vector<StepLog> train(TrainState& st, const TrainConfig& cfg, const std::vector<std::vector<double>>& dataset,
                           const std::function<void(const StepLog&)>& on_step = {});

/// Mean of the first and last `window` entries.
std::pair<double, double> smoothed_endpoints(std::span<const double> losses, std::size_t window = 20);

/// x_T ~ N(0, I) from substream(seed) then T denoising steps; returns
/// x_T ... x_0 (T + 1 vectors).
std::vector<std::vector<double>> sample(const HybridModel& m, std::size_t steps, std::uint64_t seed);

/// Checkpoint: "QDIFFCKP", u32 version, hyperparameters, u64 step,
/// u64 n_params, params, then Adam m and v, all little-endian f64.
std::string serialize_checkpoint(const TrainState& st);
TrainState deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const TrainState& st, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace qdiff::model
