#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "chime/tensor.hpp"

namespace chime {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Central-difference formula: second_order uses f(x +- h); fourth_order
/// uses f(x +- h) and f(x +- 2h) and tolerates a larger h, which keeps
/// roundoff in the loss from swamping very small gradients.
enum class Stencil { second_order, fourth_order };

/// Compares backprop gradients of `scalar_fn` against central differences
/// for every entry of every tensor in `params`. The error per entry is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
///
/// `scalar_fn` must be deterministic and smooth around the current point;
/// kinks (relu at 0, abs at 0) give meaningless results. Existing grads on
/// `params` are cleared. Throws NumericError on a non-finite evaluation.
GradCheckResult grad_check(const std::function<Tensor()>& scalar_fn, std::vector<Tensor> params,
                           double eps = 1e-6, Stencil stencil = Stencil::second_order);

}  // namespace chime
