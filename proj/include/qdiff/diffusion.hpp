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

// Classical Gaussian diffusion and the quantum depolarizing process.

#include <span>
#include <string>
#include <vector>

#include "qdiff/circuit.hpp"
#include "qdiff/qcore.hpp"

namespace qdiff::diffusion {

/// beta_t, alpha_t = 1 - beta_t and alpha_bar_t = prod_{s<=t} alpha_s for
/// t = 1..T (stored at index t-1).
class NoiseSchedule {
 public:
  static NoiseSchedule from_betas(std::vector<double> betas);

  std::size_t steps() const { return betas_.size(); }
  double beta(std::size_t t) const { return betas_.at(t - 1); }
  double alpha(std::size_t t) const { return alphas_.at(t - 1); }
  /// alpha_bar_0 = 1 by convention.
  double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bars_.at(t - 1); }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  std::vector<double> betas_, alphas_, alpha_bars_;
};

/// p_t and alpha_t = prod_{s<=t} (1 - p_s).
class DepolSchedule {
 public:
  static DepolSchedule from_probs(std::vector<double> probs);
  /// p_t = beta_t, so the quantum alpha_t equals the classical alpha_bar_t.
  static DepolSchedule matching(const NoiseSchedule& sched);

  std::size_t steps() const { return probs_.size(); }
  double prob(std::size_t t) const { return probs_.at(t - 1); }
  double alpha(std::size_t t) const { return t == 0 ? 1.0 : alpha_prods_.at(t - 1); }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_, alpha_prods_;
};

struct DiffusionSample {
  std::vector<double> x_t;
  std::size_t t = 0;
  std::vector<double> eps;
};

/// beta linearly spaced from beta_start to beta_end inclusive.
NoiseSchedule linear_schedule(std::size_t steps, double beta_start, double beta_end);

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps. t = 0 returns x0.
DiffusionSample forward_sample(std::span<const double> x0, std::size_t t, const NoiseSchedule& sched,
                               std::span<const double> eps);

/// Mean squared error ||eps_true - eps_pred||^2 / len.
double simple_loss(std::span<const double> eps_true, std::span<const double> eps_pred);

/// (1 - p) rho + p I/d.
DensityMatrix depolarize_step(const DensityMatrix& rho, double p);

/// alpha_t rho0 + (1 - alpha_t) I/d.
DensityMatrix depolarize_closed(const DensityMatrix& rho0, std::size_t t, const DepolSchedule& sched);

/// U(theta) rho U(theta)^dagger.
DensityMatrix reverse_step(const DensityMatrix& rho, const circuit::ParamCircuit& c,
                           std::span<const double> params);

/// 1 - <target|rho|target>.
double infidelity_loss(const DensityMatrix& rho, const StateVector& target);

std::string schedule_to_json(const NoiseSchedule& sched);
NoiseSchedule schedule_from_json(const std::string& text);
std::string schedule_to_json(const DepolSchedule& sched);
DepolSchedule depol_schedule_from_json(const std::string& text);

}  // namespace qdiff::diffusion
