#include "chime/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "chime/ops.hpp"

namespace chime {

Tensor ParamFactory::add(const std::string& name, Tensor t, bool decay) {
  t.set_requires_grad(true);
  sink_.push_back({name, t, decay});
  return t;
}

Tensor ParamFactory::weight(const std::string& name, Shape shape) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) {
    double z = normal(rng_);
    while (std::fabs(z) > 2.0) z = normal(rng_);
    v = z * std_;
  }
  return add(name, Tensor::from(std::move(shape), std::move(values)), true);
}

Tensor ParamFactory::bias(const std::string& name, std::size_t n) { return add(name, Tensor::zeros({n}), false); }

Tensor ParamFactory::gain(const std::string& name, std::size_t n) {
  return add(name, Tensor::full({n}, 1.0), false);
}

AttentionMask AttentionMask::key_padding(std::size_t queries, std::span<const std::uint8_t> key_valid) {
  AttentionMask mask;
  mask.queries = queries;
  mask.keys = key_valid.size();
  mask.allow.resize(queries * mask.keys);
  for (std::size_t q = 0; q < queries; ++q)
    for (std::size_t k = 0; k < mask.keys; ++k) mask.allow[q * mask.keys + k] = key_valid[k] ? 1 : 0;
  return mask;
}

AttentionParams AttentionParams::create(ParamFactory& f, const std::string& prefix, std::size_t d,
                                        std::size_t heads) {
  if (heads == 0 || d % heads != 0) throw std::invalid_argument(prefix + ": heads must divide d");
  AttentionParams p;
  p.heads = heads;
  p.wq = f.weight(prefix + ".wq", {d, d});
  p.bq = f.bias(prefix + ".bq", d);
  p.wk = f.weight(prefix + ".wk", {d, d});
  p.bk = f.bias(prefix + ".bk", d);
  p.wv = f.weight(prefix + ".wv", {d, d});
  p.bv = f.bias(prefix + ".bv", d);
  p.wo = f.weight(prefix + ".wo", {d, d});
  p.bo = f.bias(prefix + ".bo", d);
  return p;
}

FeedForwardParams FeedForwardParams::create(ParamFactory& f, const std::string& prefix, std::size_t d,
                                            std::size_t inner) {
  return {f.weight(prefix + ".w1", {d, inner}), f.bias(prefix + ".b1", inner), f.weight(prefix + ".w2", {inner, d}),
          f.bias(prefix + ".b2", d)};
}

LayerNormParams LayerNormParams::create(ParamFactory& f, const std::string& prefix, std::size_t d) {
  return {f.gain(prefix + ".gain", d), f.bias(prefix + ".shift", d)};
}

TransformerBlockParams TransformerBlockParams::create(ParamFactory& f, const std::string& prefix, std::size_t d,
                                                      std::size_t heads, std::size_t inner) {
  TransformerBlockParams p;
  p.attention = AttentionParams::create(f, prefix + ".attn", d, heads);
  p.attention_norm = LayerNormParams::create(f, prefix + ".attn_norm", d);
  p.feed_forward = FeedForwardParams::create(f, prefix + ".ff", d, inner);
  p.output_norm = LayerNormParams::create(f, prefix + ".out_norm", d);
  return p;
}

Tensor multi_head_attention(const Tensor& query, const Tensor& memory, const AttentionParams& params,
                            const AttentionMask* mask, std::vector<Tensor>* weights_out) {
  const auto d = params.wq.dim(0);
  if (query.rank() != 2 || memory.rank() != 2 || query.dim(1) != d || memory.dim(1) != d) {
    throw std::invalid_argument("multi_head_attention: inputs must be [S, " + std::to_string(d) + "], got " +
                                shape_string(query.shape()) + " and " + shape_string(memory.shape()));
  }
  const auto sq = query.dim(0), sk = memory.dim(0);
  if (mask && (mask->queries != sq || mask->keys != sk)) {
    throw std::invalid_argument("multi_head_attention: mask shape does not match inputs");
  }
  const auto head_dim = d / params.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Tensor q = add_row(matmul(query, params.wq), params.bq);
  const Tensor k = add_row(matmul(memory, params.wk), params.bk);
  const Tensor v = add_row(matmul(memory, params.wv), params.bv);

  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const auto qh = slice_cols(q, h * head_dim, head_dim);
    const auto kh = slice_cols(k, h * head_dim, head_dim);
    const auto vh = slice_cols(v, h * head_dim, head_dim);
    Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt);
    if (mask) scores = mask_logits(scores, mask->allow);
    const Tensor weights = softmax(scores, 1);
    if (weights_out) weights_out->push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  const Tensor merged = params.heads == 1 ? heads.front() : concat_cols(heads);
  return add_row(matmul(merged, params.wo), params.bo);
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& params, Activation activation) {
  Tensor hidden = add_row(matmul(x, params.w1), params.b1);
  hidden = activation == Activation::gelu ? gelu(hidden) : relu(hidden);
  return add_row(matmul(hidden, params.w2), params.b2);
}

Tensor transformer_block(const Tensor& query, const Tensor& memory, const TransformerBlockParams& params,
                         const AttentionMask* mask, const BlockContext& ctx) {
  auto drop = [&](const Tensor& t) {
    return ctx.rng && ctx.dropout > 0.0 ? dropout(t, ctx.dropout, *ctx.rng) : t;
  };
  const Tensor attended = drop(multi_head_attention(query, memory, params.attention, mask));
  const Tensor x = layer_norm(add(query, attended), params.attention_norm.gain, params.attention_norm.shift,
                              ctx.layer_norm_eps);
  const Tensor ff = drop(feed_forward(x, params.feed_forward, ctx.activation));
  return layer_norm(add(x, ff), params.output_norm.gain, params.output_norm.shift, ctx.layer_norm_eps);
}

}  // namespace chime
