#include "chime/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "chime/errors.hpp"

namespace chime {

OptimState OptimState::zeros_like(std::span<const Parameter> params) {
  OptimState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.numel(), 0.0);
    state.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return state;
}

void adamw_step(std::span<Parameter> params, OptimState& state, double lr, const AdamWConfig& config) {
  if (lr < 0) throw std::invalid_argument("adamw_step: learning rate must be non-negative");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adamw_step: optimizer state does not match parameter list");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& param = params[pi];
    auto values = param.tensor.mutable_data();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    if (m.size() != values.size() || v.size() != values.size()) {
      throw std::invalid_argument("adamw_step: moment shape mismatch for " + param.name);
    }
    const bool has_grad = param.tensor.has_grad();
    const auto grad = param.tensor.grad();
    const double decay = param.decay ? lr * config.weight_decay : 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      values[i] -= decay * values[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

double lr_at(std::int64_t step, std::int64_t total_steps, double peak, double warmup_fraction) {
  if (total_steps <= 0) throw std::invalid_argument("lr_at: total_steps must be positive");
  if (step < 0 || step > total_steps) throw std::invalid_argument("lr_at: step outside [0, total_steps]");
  const auto warmup = static_cast<std::int64_t>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

double clip_global_norm(std::span<std::vector<double>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g) {
      if (!std::isfinite(v)) throw NumericError("clip_global_norm: non-finite gradient");
      sq += v * v;
    }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double factor = max_norm / norm;
    for (auto& g : grads)
      for (auto& v : g) v *= factor;
  }
  return norm;
}

double clip_global_norm(std::span<Parameter> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double v : p.tensor.grad()) {
      if (!std::isfinite(v)) throw NumericError("clip_global_norm: non-finite gradient in " + p.name);
      sq += v * v;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (auto& v : p.tensor.mutable_grad()) v *= factor;
    }
  }
  return norm;
}

}  // namespace chime
