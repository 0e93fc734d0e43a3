#include "chime/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "chime/errors.hpp"
#include "chime/ops.hpp"

namespace chime {

namespace {

void require_finite(const Tensor& t, const std::string& where) {
  for (double v : t.data())
    if (!std::isfinite(v)) throw NumericError("non-finite activations in " + where);
}

}  // namespace

EncoderParams EncoderParams::create(ParamFactory& f, const ModelConfig& config) {
  const auto d = config.d_model;
  EncoderParams p;
  p.token_embedding = f.weight("encoder.token_embedding", {config.vocab_size, d});
  p.segment_embedding = f.weight("encoder.segment_embedding", {2, d});
  p.position_embedding = f.weight("encoder.position_embedding", {config.layout().total(), d});
  for (std::size_t b = 0; b < config.blocks; ++b) {
    p.blocks.push_back(TransformerBlockParams::create(f, "encoder.block" + std::to_string(b), d, config.heads,
                                                      config.ff_inner));
  }
  return p;
}

Tensor embed(const InstanceTensors& instance, const EncoderParams& params) {
  if (instance.total_length() > params.position_embedding.dim(0)) {
    throw std::invalid_argument("embed: instance longer than the position table");
  }
  return add(add(embedding(params.token_embedding, instance.tokens),
                 embedding(params.segment_embedding, instance.segments)),
             embedding(params.position_embedding, instance.positions));
}

AttentionMask seq2seq_mask(std::size_t part1, std::size_t part2, std::span<const std::uint8_t> pad_mask) {
  if (part1 == 0 || part2 == 0) throw std::invalid_argument("seq2seq_mask: both parts must be non-empty");
  const auto n = part1 + part2;
  if (pad_mask.size() != n) throw std::invalid_argument("seq2seq_mask: pad mask length must be part1 + part2");
  AttentionMask mask;
  mask.queries = n;
  mask.keys = n;
  mask.allow.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t visible = i < part1 ? part1 : i + 1;
    for (std::size_t j = 0; j < visible; ++j) mask.allow[i * n + j] = pad_mask[j] ? 1 : 0;
  }
  return mask;
}

EncodedPassage encode(const InstanceTensors& instance, const EncoderParams& params, const BlockContext& ctx) {
  const auto mask = seq2seq_mask(instance.part1_length, instance.part2_length, instance.pad_mask);
  Tensor x = embed(instance, params);
  if (ctx.rng && ctx.dropout > 0.0) x = dropout(x, ctx.dropout, *ctx.rng);
  require_finite(x, "encoder embeddings");
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    x = transformer_block(x, x, params.blocks[b], &mask, ctx);
    require_finite(x, "encoder block " + std::to_string(b));
  }
  std::vector<double> keep(instance.pad_mask.begin(), instance.pad_mask.end());
  x = scale_rows(x, keep);
  EncodedPassage out;
  out.hidden = x;
  out.context = slice_rows(x, 0, instance.part1_length);
  out.answer = slice_rows(x, instance.part1_length, instance.part2_length);
  return out;
}

}  // namespace chime
