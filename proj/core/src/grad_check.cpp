#include "chime/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chime/errors.hpp"

namespace chime {

namespace {

double evaluate(const std::function<Tensor()>& fn) {
  NoGradGuard no_grad;
  const double v = fn().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& scalar_fn, std::vector<Tensor> params, double eps,
                           Stencil stencil) {
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  PrecisionGuard precision(Precision::f64);

  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor loss = scalar_fn();
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite function value");
  loss.backward();

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      auto at = [&](double offset) {
        values[i] = original + offset;
        const double v = evaluate(scalar_fn);
        values[i] = original;
        return v;
      };
      double numeric = 0.0;
      if (stencil == Stencil::second_order) {
        numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      } else {
        numeric = (-at(2.0 * eps) + 8.0 * at(eps) - 8.0 * at(-eps) + at(-2.0 * eps)) / (12.0 * eps);
      }
      const double err = std::fabs(analytic[i] - numeric) /
                         std::max(1e-8, std::fabs(analytic[i]) + std::fabs(numeric));
      ++result.entries_checked;
      if (err > result.max_relative_error || result.entries_checked == 1) {
        result.max_relative_error = err;
        result.worst_param = pi;
        result.worst_entry = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace chime
