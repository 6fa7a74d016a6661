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

#pragma once

#include <cstdint>
#include <random>

#include "domain.h"

namespace spotrl {

// Continuous-batching decode model: linear in batch size up to a plateau,
// scaled down hyperbolically as the mean context grows.
struct GenerationModel {
  double r_single = 100.0;       // tokens/sec at batch size 1, context c_ref
  double t_plateau = 2000.0;     // max decode tokens/sec at context c_ref
  double gamma = 1.0 / 16384.0;  // per-token context decay
  double prefill_rate = 20000.0;
  double c_ref = 1024.0;
  std::int32_t max_batch = 64;  // concurrent sequences an instance schedules
};

void validate(const GenerationModel& model);

// (1 + gamma * c_ref) / (1 + gamma * c); 1 at the reference context.
double context_factor(const GenerationModel& model, double context);

// Aggregate decode tokens/sec of an instance running b sequences at mean
// context c_mean. Each sequence receives 1/b of it.
double instance_throughput(const GenerationModel& model, std::int32_t b,
                           double c_mean);

// ceil(t_plateau / r_single): first batch size at the plateau.
std::int32_t analytic_plateau(const GenerationModel& model);

// Time/progress map for a batch whose membership is fixed. Every decode
// iteration emits one token per sequence and grows the mean context by one,
// so dt/dx = alpha * (base + gamma * x) with x the (fractional) iteration count.
class DecodeClock {
 public:
  DecodeClock() = default;
  DecodeClock(const GenerationModel& model, std::int32_t batch, double c0,
              double speed);

  Seconds time_for(double iterations) const;
  double iterations_in(Seconds dt) const;
  bool idle() const { return alpha_ <= 0; }

 private:
  double alpha_ = 0;
  double base_ = 1;
  double gamma_ = 0;
};

struct TrainerModel {
  Seconds fixed_overhead = 0.5;     // per microbatch
  // Calibrated so co-located rollout takes about 70% of a step.
  Seconds per_token_time = 5.7e-5;  // per prompt+response token
};

Seconds microbatch_train_time(const TrainerModel& model, std::int64_t tokens);

struct LengthDistribution {
  double log_mean = 7.6;   // ln of the median response length
  double log_sigma = 0.8;
  std::int32_t max_response_len = 14336;
  // Median grows by (1 + inflation * step_index).
  double per_step_inflation = 0.0;
  std::int32_t prompt_min = 128;
  std::int32_t prompt_max = 384;
};

void validate(const LengthDistribution& params);

// Log-normal truncated (by rejection) to [1, max_response_len], rounded.
std::int32_t sample_response_length(std::mt19937_64& rng,
                                    const LengthDistribution& params,
                                    std::int64_t step_index = 0);

std::int32_t sample_prompt_length(std::mt19937_64& rng,
                                  const LengthDistribution& params);

// Closed-form mean of the truncated log-normal (before rounding).
double expected_response_length(const LengthDistribution& params,
                                std::int64_t step_index = 0);

}  // namespace spotrl
