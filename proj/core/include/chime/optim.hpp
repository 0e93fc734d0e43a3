#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chime/tensor.hpp"

namespace chime {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.01;
};

/// A trainable tensor plus whether decoupled weight decay applies to it.
/// Biases and layer-norm gains/shifts are registered with decay = false.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool decay = true;
};

/// First/second moments per parameter and the number of steps taken.
struct OptimState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;

  static OptimState zeros_like(std::span<const Parameter> params);
};

/// One AdamW update in place. The step counter is incremented first, so the
/// bias corrections use t >= 1. Parameters without a gradient are treated as
/// having a zero gradient.
void adamw_step(std::span<Parameter> params, OptimState& state, double lr, const AdamWConfig& config);

/// Linear warmup from 0 to `peak` over the first floor(warmup_fraction *
/// total_steps) steps, then linear decay to 0 at `total_steps`. When the
/// warmup length rounds to zero the schedule starts at `peak`.
double lr_at(std::int64_t step, std::int64_t total_steps, double peak, double warmup_fraction = 0.2);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm observed before scaling. Throws NumericError on
/// non-finite gradients.
double clip_global_norm(std::span<Parameter> params, double max_norm);
double clip_global_norm(std::span<std::vector<double>> grads, double max_norm);

}  // namespace chime
