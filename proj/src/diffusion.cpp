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

#include "qdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace qdiff::diffusion {

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("NoiseSchedule: need at least one step");
  NoiseSchedule s;
  double prod = 1.0;
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("NoiseSchedule: beta must lie in (0, 1)");
    s.alphas_.push_back(1.0 - b);
    prod *= 1.0 - b;
    s.alpha_bars_.push_back(prod);
  }
  s.betas_ = std::move(betas);
  return s;
}

DepolSchedule DepolSchedule::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("DepolSchedule: need at least one step");
  DepolSchedule s;
  double prod = 1.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("DepolSchedule: p must lie in [0, 1]");
    prod *= 1.0 - p;
    s.alpha_prods_.push_back(prod);
  }
  s.probs_ = std::move(probs);
  return s;
}

DepolSchedule DepolSchedule::matching(const NoiseSchedule& sched) { return from_probs(sched.betas()); }

NoiseSchedule linear_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("linear_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + f * (beta_end - beta_start);
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

DiffusionSample forward_sample(std::span<const double> x0, std::size_t t, const NoiseSchedule& sched,
                               std::span<const double> eps) {
  if (t > sched.steps()) throw std::out_of_range("forward_sample: timestep out of range");
  if (eps.size() != x0.size()) throw std::invalid_argument("forward_sample: eps length mismatch");
  const double a = std::sqrt(sched.alpha_bar(t)), b = std::sqrt(1.0 - sched.alpha_bar(t));
  DiffusionSample s{std::vector<double>(x0.size()), t, std::vector<double>(eps.begin(), eps.end())};
  for (std::size_t i = 0; i < x0.size(); ++i) s.x_t[i] = a * x0[i] + b * eps[i];
  return s;
}

double simple_loss(std::span<const double> eps_true, std::span<const double> eps_pred) {
  if (eps_true.size() != eps_pred.size() || eps_true.empty()) {
    throw std::invalid_argument("simple_loss: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < eps_true.size(); ++i) {
    const double d = eps_true[i] - eps_pred[i];
    s += d * d;
  }
  return s / static_cast<double>(eps_true.size());
}

namespace {

DensityMatrix mix_with_identity(const DensityMatrix& rho, double keep) {
  const std::size_t d = rho.dim();
  ComplexMatrix m = rho.mat();
  m *= keep;
  const double add = (1.0 - keep) / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) += add;
  return DensityMatrix::assume_valid(std::move(m));
}

}  // namespace

DensityMatrix depolarize_step(const DensityMatrix& rho, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("depolarize_step: p must lie in [0, 1]");
  return mix_with_identity(rho, 1.0 - p);
}

DensityMatrix depolarize_closed(const DensityMatrix& rho0, std::size_t t, const DepolSchedule& sched) {
  if (t < 1 || t > sched.steps()) throw std::out_of_range("depolarize_closed: timestep out of range");
  return mix_with_identity(rho0, sched.alpha(t));
}

DensityMatrix reverse_step(const DensityMatrix& rho, const circuit::ParamCircuit& c,
                           std::span<const double> params) {
  if (static_cast<std::size_t>(1) << c.n_qubits() != rho.dim()) {
    throw std::invalid_argument("reverse_step: dimension mismatch");
  }
  const auto u = circuit::circuit_unitary(c, params);
  return DensityMatrix::assume_valid(u * rho.mat() * u.adjoint());
}

double infidelity_loss(const DensityMatrix& rho, const StateVector& target) {
  return 1.0 - state_fidelity(rho, target);
}

std::string schedule_to_json(const NoiseSchedule& sched) {
  return nlohmann::json{{"kind", "gaussian"}, {"betas", sched.betas()}, {"alpha_bars", sched.alpha_bars()}}.dump();
}

NoiseSchedule schedule_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("kind") != "gaussian") throw std::invalid_argument("schedule json: not a gaussian schedule");
  return NoiseSchedule::from_betas(j.at("betas").get<std::vector<double>>());
}

std::string schedule_to_json(const DepolSchedule& sched) {
  std::vector<double> alphas;
  for (std::size_t t = 1; t <= sched.steps(); ++t) alphas.push_back(sched.alpha(t));
  return nlohmann::json{{"kind", "depolarizing"}, {"probs", sched.probs()}, {"alphas", alphas}}.dump();
}

DepolSchedule depol_schedule_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("kind") != "depolarizing") throw std::invalid_argument("schedule json: not a depolarizing schedule");
  return DepolSchedule::from_probs(j.at("probs").get<std::vector<double>>());
}

}  // namespace qdiff::diffusion
