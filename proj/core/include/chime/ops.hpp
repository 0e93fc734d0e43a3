#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "chime/tensor.hpp"

namespace chime {

// Differentiable tensor operations. Matrix ops take rank-2 tensors; shape
// violations throw std::invalid_argument.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// 1 - x, elementwise.
Tensor one_minus(const Tensor& x);

/// x[m,n] + bias[n] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);
/// Multiplies row i of x by the constant factors[i].
Tensor scale_rows(const Tensor& x, std::span<const double> factors);

Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m,k] * b[n,k]^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);
/// |x|; the derivative at 0 is taken as 0. Gradient checks at the kink are
/// meaningless and are not supported.
Tensor abs(const Tensor& x);

/// Max-subtracted softmax along `axis` of a tensor of any rank.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes each row over the last axis, then applies gain and shift.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-12);

/// Gathers rows of table[V,d] by id.
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Sets entries with allow[i] == 0 to -infinity. A row with nothing allowed
/// stays as-is so that softmax remains finite.
Tensor mask_logits(const Tensor& x, std::span<const std::uint8_t> allow);

/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of -log softmax(logits)[target] over rows with mask != 0.
/// Throws std::invalid_argument when every row is masked.
Tensor masked_cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                            std::span<const std::uint8_t> mask);

}  // namespace chime
