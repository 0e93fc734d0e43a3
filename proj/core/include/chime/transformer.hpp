#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chime/config.hpp"
#include "chime/optim.hpp"
#include "chime/tensor.hpp"

namespace chime {

/// Allocates and names trainable tensors. Weights draw from a normal
/// truncated at two standard deviations; biases start at zero and gains at 1.
class ParamFactory {
 public:
  ParamFactory(std::vector<Parameter>& sink, std::mt19937_64& rng, double std)
      : sink_(sink), rng_(rng), std_(std) {}

  Tensor weight(const std::string& name, Shape shape);
  Tensor bias(const std::string& name, std::size_t n);
  Tensor gain(const std::string& name, std::size_t n);

 private:
  Tensor add(const std::string& name, Tensor t, bool decay);

  std::vector<Parameter>& sink_;
  std::mt19937_64& rng_;
  double std_;
};

/// Row-major allow matrix: allow[q * keys + k] != 0 lets query q see key k.
struct AttentionMask {
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<std::uint8_t> allow;

  bool allowed(std::size_t q, std::size_t k) const { return allow[q * keys + k] != 0; }
  /// Every query may see exactly the keys with key_valid[k] != 0.
  static AttentionMask key_padding(std::size_t queries, std::span<const std::uint8_t> key_valid);
};

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t heads = 1;

  static AttentionParams create(ParamFactory& f, const std::string& prefix, std::size_t d, std::size_t heads);
};

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;

  static FeedForwardParams create(ParamFactory& f, const std::string& prefix, std::size_t d, std::size_t inner);
};

struct LayerNormParams {
  Tensor gain, shift;

  static LayerNormParams create(ParamFactory& f, const std::string& prefix, std::size_t d);
};

/// Post-norm transformer block: attention sublayer then feed-forward
/// sublayer, each wrapped in residual + layer normalization.
struct TransformerBlockParams {
  AttentionParams attention;
  LayerNormParams attention_norm;
  FeedForwardParams feed_forward;
  LayerNormParams output_norm;

  static TransformerBlockParams create(ParamFactory& f, const std::string& prefix, std::size_t d,
                                       std::size_t heads, std::size_t inner);
};

/// Training-time behaviour shared by the blocks. Dropout is off when
/// `rng` is null or rate is 0.
struct BlockContext {
  Activation activation = Activation::gelu;
  double layer_norm_eps = 1e-12;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

/// Scaled dot-product attention with queries from `query` and keys/values
/// from `memory`, split across `params.heads` heads. Returns the projected
/// output (before any residual). When `weights_out` is given it receives the
/// per-head softmax matrices.
Tensor multi_head_attention(const Tensor& query, const Tensor& memory, const AttentionParams& params,
                            const AttentionMask* mask, std::vector<Tensor>* weights_out = nullptr);

Tensor feed_forward(const Tensor& x, const FeedForwardParams& params, Activation activation);

Tensor transformer_block(const Tensor& query, const Tensor& memory, const TransformerBlockParams& params,
                         const AttentionMask* mask, const BlockContext& ctx);

}  // namespace chime
