#include "chime/instance.hpp"

#include <stdexcept>
#include <string>

namespace chime {

namespace {

void require_cap(std::size_t size, std::size_t cap, const char* what) {
  if (size > cap) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(size) + " tokens, cap is " +
                                std::to_string(cap) + "; filter before assembling");
  }
}

InstanceTensors build(std::span<const TokenId> question, std::span<const TokenId> passage,
                      std::span<const TokenId> answer, bool close_answer, const Caps& caps) {
  const auto layout = Layout::from_caps(caps);
  InstanceTensors inst;
  inst.part1_length = layout.part1;
  inst.part2_length = layout.part2;
  const auto total = layout.total();
  inst.tokens.assign(total, kPad);
  inst.segments.assign(total, kSegmentA);
  inst.positions.resize(total);
  inst.pad_mask.assign(total, 0);

  std::size_t pos = 0;
  auto put = [&](TokenId token, TokenId segment) {
    inst.tokens[pos] = token;
    inst.segments[pos] = segment;
    inst.pad_mask[pos] = 1;
    ++pos;
  };
  put(kCls, kSegmentA);
  for (auto t : question) put(t, kSegmentA);
  put(kSep, kSegmentA);
  for (auto t : passage) put(t, kSegmentB);
  for (std::size_t i = pos; i < layout.part1; ++i) inst.segments[i] = kSegmentB;

  pos = layout.part1;
  put(kSep, kSegmentA);
  for (auto t : answer) put(t, kSegmentA);
  if (close_answer) put(kSep, kSegmentA);

  for (std::size_t i = 0; i < total; ++i) inst.positions[i] = static_cast<TokenId>(i);

  inst.targets.assign(layout.part2, kPad);
  inst.target_mask.assign(layout.part2, 0);
  for (std::size_t i = 0; i + 1 < layout.part2; ++i) {
    const auto next = inst.tokens[layout.part1 + i + 1];
    inst.targets[i] = next;
    inst.target_mask[i] = next == kPad ? 0 : 1;
  }
  return inst;
}

}  // namespace

InstanceTensors assemble_triple(std::span<const TokenId> question, std::span<const TokenId> passage,
                                std::span<const TokenId> answer, const Caps& caps) {
  require_cap(question.size(), caps.question, "question");
  require_cap(passage.size(), caps.passage, "passage");
  require_cap(answer.size(), caps.answer, "answer");
  return build(question, passage, answer, true, caps);
}

InstanceTensors assemble_prefix(std::span<const TokenId> question, std::span<const TokenId> passage,
                                std::span<const TokenId> prefix, const Caps& caps) {
  require_cap(question.size(), caps.question, "question");
  require_cap(passage.size(), caps.passage, "passage");
  require_cap(prefix.size(), caps.answer + 1, "answer prefix");
  return build(question, passage, prefix, false, caps);
}

std::vector<InstanceTensors> assemble_group(const QARecord& record, std::span<const TokenId> answer,
                                            const Caps& caps) {
  if (record.passages.empty()) throw std::invalid_argument("record " + record.id + " has no passages");
  std::vector<InstanceTensors> out;
  out.reserve(record.passages.size());
  for (const auto& p : record.passages) out.push_back(assemble_triple(record.question, p, answer, caps));
  return out;
}

void check_instance(const InstanceTensors& inst) {
  const auto n = inst.total_length();
  auto fail = [](const std::string& what) { throw std::logic_error("instance invariant violated: " + what); };
  if (inst.tokens.size() != n || inst.segments.size() != n || inst.positions.size() != n || inst.pad_mask.size() != n)
    fail("array lengths differ from part1 + part2");
  if (inst.targets.size() != inst.part2_length || inst.target_mask.size() != inst.part2_length)
    fail("target arrays must span part 2");
  if (inst.tokens[0] != kCls) fail("part 1 must start with [CLS]");
  if (inst.tokens[inst.part1_length] != kSep) fail("part 2 must start with [SEP]");
  for (std::size_t i = 0; i < n; ++i) {
    if ((inst.tokens[i] == kPad) == (inst.pad_mask[i] == 1)) fail("pad mask disagrees with tokens");
    if (inst.positions[i] != static_cast<TokenId>(i)) fail("positions must be 0..N-1");
    if (i >= inst.part1_length && inst.segments[i] != kSegmentA) fail("part 2 must be segment A");
  }
  // Segments in part 1: A up to and including the first [SEP], then B.
  bool in_passage = false;
  for (std::size_t i = 0; i < inst.part1_length; ++i) {
    const auto expected = in_passage ? kSegmentB : kSegmentA;
    if (inst.segments[i] != expected) fail("part 1 segment pattern must be A (question) then B (passage)");
    if (!in_passage && inst.tokens[i] == kSep) in_passage = true;
  }
  for (std::size_t i = 0; i < inst.part1_length; ++i)
    if (inst.pad_mask[i] == 0)
      for (std::size_t j = i; j < inst.part1_length; ++j)
        if (inst.pad_mask[j]) fail("part 1 padding must be on the right");
  for (std::size_t i = inst.part1_length; i < n; ++i)
    if (inst.pad_mask[i] == 0)
      for (std::size_t j = i; j < n; ++j)
        if (inst.pad_mask[j]) fail("part 2 padding must be on the right");
  for (std::size_t i = 0; i < inst.part2_length; ++i) {
    const auto next = i + 1 < inst.part2_length ? inst.tokens[inst.part1_length + i + 1] : kPad;
    if (inst.targets[i] != next) fail("targets must be part 2 shifted left by one");
    if ((inst.target_mask[i] == 1) != (next != kPad)) fail("target mask must exclude [PAD]");
  }
}

}  // namespace chime
