/* Copyright 2026 The spotrl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "generation_model.h"

#include <algorithm>
#include <cmath>

namespace spotrl {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double step_log_mean(const LengthDistribution& params, std::int64_t step_index) {
  return params.log_mean +
         std::log1p(params.per_step_inflation * static_cast<double>(step_index));
}

}  // namespace

void validate(const GenerationModel& model) {
  if (!(model.r_single > 0) || !(model.t_plateau > 0) || !(model.gamma >= 0) ||
      !(model.prefill_rate > 0) || !(model.c_ref >= 0) || model.max_batch <= 0) {
    throw Error("generation model coefficients must be positive");
  }
  if (model.t_plateau < model.r_single) {
    throw Error("generation model: t_plateau must be >= r_single");
  }
}

double context_factor(const GenerationModel& model, double context) {
  return (1.0 + model.gamma * model.c_ref) / (1.0 + model.gamma * context);
}

double instance_throughput(const GenerationModel& model, std::int32_t b,
                           double c_mean) {
  if (b < 0) throw Error("batch size must be >= 0");
  if (b == 0) return 0;
  return std::min(b * model.r_single, model.t_plateau) *
         context_factor(model, c_mean);
}

std::int32_t analytic_plateau(const GenerationModel& model) {
  return static_cast<std::int32_t>(std::ceil(model.t_plateau / model.r_single - 1e-12));
}

DecodeClock::DecodeClock(const GenerationModel& model, std::int32_t batch,
                         double c0, double speed) {
  if (batch <= 0) return;
  const double capacity = std::min(batch * model.r_single, model.t_plateau) *
                          speed * (1.0 + model.gamma * model.c_ref);
  alpha_ = static_cast<double>(batch) / capacity;
  base_ = 1.0 + model.gamma * c0;
  gamma_ = model.gamma;
}

Seconds DecodeClock::time_for(double iterations) const {
  if (iterations <= 0) return 0;
  return alpha_ * (base_ * iterations + 0.5 * gamma_ * iterations * iterations);
}

double DecodeClock::iterations_in(Seconds dt) const {
  if (dt <= 0 || alpha_ <= 0) return 0;
  const double q = dt / alpha_;
  // Positive root of gamma/2 x^2 + base x - q = 0, cancellation-free form.
  return 2.0 * q / (base_ + std::sqrt(base_ * base_ + 2.0 * gamma_ * q));
}

Seconds microbatch_train_time(const TrainerModel& model, std::int64_t tokens) {
  return model.fixed_overhead + model.per_token_time * static_cast<double>(tokens);
}

void validate(const LengthDistribution& params) {
  if (!(params.log_sigma >= 0) || !std::isfinite(params.log_mean)) {
    throw Error("length distribution: invalid log-normal parameters");
  }
  if (params.max_response_len < 1) {
    throw Error("length distribution: max_response_len must be >= 1");
  }
  if (params.prompt_min < 1 || params.prompt_max < params.prompt_min) {
    throw Error("length distribution: invalid prompt length range");
  }
  if (params.per_step_inflation < 0) {
    throw Error("length distribution: inflation must be >= 0");
  }
}

std::int32_t sample_response_length(std::mt19937_64& rng,
                                    const LengthDistribution& params,
                                    std::int64_t step_index) {
  const double mu = step_log_mean(params, step_index);
  const double hi = static_cast<double>(params.max_response_len);
  auto round_clamp = [&](double x) {
    return static_cast<std::int32_t>(
        std::clamp<double>(std::llround(x), 1.0, hi));
  };
  if (params.log_sigma == 0) return round_clamp(std::exp(mu));

  std::lognormal_distribution<double> dist(mu, params.log_sigma);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = dist(rng);
    if (x >= 1.0 && x <= hi) return round_clamp(x);
  }
  return round_clamp(std::exp(mu));
}

std::int32_t sample_prompt_length(std::mt19937_64& rng,
                                  const LengthDistribution& params) {
  std::uniform_int_distribution<std::int32_t> dist(params.prompt_min,
                                                   params.prompt_max);
  return dist(rng);
}

double expected_response_length(const LengthDistribution& params,
                                std::int64_t step_index) {
  const double mu = step_log_mean(params, step_index);
  const double s = params.log_sigma;
  const double hi = static_cast<double>(params.max_response_len);
  if (s == 0) return std::clamp(std::exp(mu), 1.0, hi);
  const double a = (std::log(1.0) - mu) / s;
  const double b = (std::log(hi) - mu) / s;
  const double mass = normal_cdf(b) - normal_cdf(a);
  if (mass <= 0) return std::clamp(std::exp(mu), 1.0, hi);
  return std::exp(mu + 0.5 * s * s) * (normal_cdf(b - s) - normal_cdf(a - s)) /
         mass;
}

}  // namespace spotrl
