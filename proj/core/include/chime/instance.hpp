#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chime/records.hpp"
#include "chime/vocab.hpp"

namespace chime {

inline constexpr TokenId kSegmentA = 0;
inline constexpr TokenId kSegmentB = 1;

/// Fixed part lengths derived from the caps:
///   part 1 = [CLS] question [SEP] passage      -> question + passage + 2
///   part 2 = [SEP] answer [SEP]                -> answer + 2
struct Layout {
  std::size_t part1 = 0;
  std::size_t part2 = 0;

  std::size_t total() const { return part1 + part2; }
  static Layout from_caps(const Caps& caps) { return {caps.question + caps.passage + 2, caps.answer + 2}; }
};

/// Model-ready arrays for one (question, passage, answer) triple. Both parts
/// are right-padded with [PAD] to their fixed lengths, so every passage of a
/// question yields the same total length and the same part-2 offsets.
struct InstanceTensors {
  std::vector<TokenId> tokens;
  std::vector<TokenId> segments;
  std::vector<TokenId> positions;
  std::size_t part1_length = 0;
  std::size_t part2_length = 0;
  std::vector<std::uint8_t> pad_mask;     // 1 = real token
  std::vector<TokenId> targets;           // part2_length entries; position i predicts part-2 token i+1
  std::vector<std::uint8_t> target_mask;  // 0 where the target is [PAD]

  std::size_t total_length() const { return part1_length + part2_length; }
  std::span<const std::uint8_t> part1_pad_mask() const { return std::span(pad_mask).first(part1_length); }
  std::span<const std::uint8_t> part2_pad_mask() const { return std::span(pad_mask).subspan(part1_length); }
};

/// Training layout with the answer closed by [SEP]. Throws
/// std::invalid_argument when an input exceeds its cap.
InstanceTensors assemble_triple(std::span<const TokenId> question, std::span<const TokenId> passage,
                                std::span<const TokenId> answer, const Caps& caps);

/// Generation layout: part 2 is [SEP] followed by the partial answer, left
/// open. The prefix may hold up to caps.answer + 1 tokens.
InstanceTensors assemble_prefix(std::span<const TokenId> question, std::span<const TokenId> passage,
                                std::span<const TokenId> prefix, const Caps& caps);

/// Assembles one instance per passage of `record` with the given answer.
std::vector<InstanceTensors> assemble_group(const QARecord& record, std::span<const TokenId> answer,
                                            const Caps& caps);

/// Throws std::logic_error describing the first violated invariant.
void check_instance(const InstanceTensors& instance);

}  // namespace chime
