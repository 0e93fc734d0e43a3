#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chime/config.hpp"
#include "chime/instance.hpp"
#include "chime/transformer.hpp"

namespace chime {

/// Token (V x d), segment (2 x d) and learned absolute position (N x d)
/// tables plus the self-attention stack.
struct EncoderParams {
  Tensor token_embedding;
  Tensor segment_embedding;
  Tensor position_embedding;
  std::vector<TransformerBlockParams> blocks;

  static EncoderParams create(ParamFactory& f, const ModelConfig& config);
};

/// Sum of token, segment and position embeddings per position.
Tensor embed(const InstanceTensors& instance, const EncoderParams& params);

/// Seq2seq permission matrix over part1 + part2 positions: part 1 attends
/// to all of part 1; part 2 attends to all of part 1 and to part-2
/// positions up to and including itself. Columns with pad_mask == 0 are
/// forbidden for every row.
AttentionMask seq2seq_mask(std::size_t part1, std::size_t part2, std::span<const std::uint8_t> pad_mask);

/// Encoder hidden states split at the part boundary.
struct EncodedPassage {
  Tensor hidden;   // N x d
  Tensor context;  // part1 x d
  Tensor answer;   // part2 x d
};

/// Embeddings through the masked self-attention stack. Hidden rows at
/// padded positions are zeroed, so nothing downstream can read pad content.
/// Throws NumericError naming the block that produced NaN/inf.
EncodedPassage encode(const InstanceTensors& instance, const EncoderParams& params, const BlockContext& ctx);

}  // namespace chime
