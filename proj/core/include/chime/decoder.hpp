#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "chime/model.hpp"
#include "chime/records.hpp"
#include "chime/vocab.hpp"

namespace chime {

/// logits = memory * weight + bias, one row per answer position.
Tensor project_vocab(const Tensor& memory, const Tensor& weight, const Tensor& bias);

/// Mean cross-entropy over unmasked target positions.
Tensor answer_loss(const Tensor& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> target_mask);

struct GenerationConfig {
  std::size_t max_length = 2;  // answer tokens, excluding the end token
  std::size_t beam_width = 3;
  TokenId end_token = kSep;
  double length_penalty = 1.0;  // score = log p / (emitted tokens)^length_penalty
  std::vector<TokenId> banned{kPad, kCls};

  void validate() const;
};

/// Next-token probabilities given the answer tokens emitted so far.
using NextTokenFn = std::function<std::vector<double>(std::span<const TokenId> prefix)>;

/// Probability row at the last real part-2 position after reading every
/// passage with part 2 = [SEP] + prefix. Throws std::invalid_argument when
/// the prefix no longer fits the answer cap.
std::vector<double> step_distribution(const ChimeModel& model, std::span<const TokenId> question,
                                      std::span<const std::vector<TokenId>> passages,
                                      std::span<const TokenId> prefix);

NextTokenFn model_next_token(const ChimeModel& model, const QARecord& record);

/// Argmax decoding; ties go to the lowest id. Returns the answer body
/// without the end token.
std::vector<TokenId> greedy_decode(const NextTokenFn& next, const GenerationConfig& config);
std::vector<TokenId> greedy_decode(const ChimeModel& model, const QARecord& record, const GenerationConfig& config);

struct BeamHypothesis {
  std::vector<TokenId> tokens;  // answer body, no end token
  double log_prob = 0.0;
  double score = 0.0;           // length-normalized
  bool ended = false;           // false when cut off at max_length
};

/// Length-normalized beam search. Each step keeps the `beam_width` best
/// expansions by cumulative log-probability; expansions ending in the end
/// token retire to the finished pool. Returns every finished hypothesis,
/// best score first (ties: lexicographically smaller tokens first).
std::vector<BeamHypothesis> beam_decode(const NextTokenFn& next, const GenerationConfig& config);
std::vector<BeamHypothesis> beam_decode(const ChimeModel& model, const QARecord& record,
                                        const GenerationConfig& config);

}  // namespace chime
