#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "chime/config.hpp"
#include "chime/encoder.hpp"
#include "chime/transformer.hpp"

namespace chime {

/// Position-wise forget gate sigma(a * w_state + b * w_summary + bias), with
/// d x d weights and a length-d bias. One set is shared by every passage.
struct GateParams {
  Tensor w_state;
  Tensor w_summary;
  Tensor bias;

  static GateParams create(ParamFactory& f, const std::string& prefix, std::size_t d);
};

/// Which pieces exist depends on the variant: chime_c has no context block
/// or context gate, chime_a has no answer gate.
struct MemoryParams {
  std::optional<TransformerBlockParams> context_block;
  std::optional<GateParams> context_gate;
  TransformerBlockParams answer_block;
  std::optional<GateParams> answer_gate;

  static MemoryParams create(ParamFactory& f, const ModelConfig& config);
};

/// One transformer block whose queries come from `query` and keys/values
/// from `keys`; the output has the query's shape. Keys with
/// key_valid[k] == 0 are ignored; an empty span allows every key.
Tensor cross_attend(const Tensor& query, const Tensor& keys, std::span<const std::uint8_t> key_valid,
                    const TransformerBlockParams& params, const BlockContext& ctx);

Tensor gate(const Tensor& state, const Tensor& summary, const GateParams& params);

/// g * retained + (1 - g) * incoming, elementwise.
Tensor gated_mix(const Tensor& g, const Tensor& retained, const Tensor& incoming);

struct ContextUpdate {
  Tensor memory;
  Tensor gate;
  Tensor summary;
};

/// Z = cross_attend(M_prev, H_c); G = gate(M_prev, Z); M = G*M_prev + (1-G)*H_c.
ContextUpdate update_context(const Tensor& previous, const Tensor& hidden, std::span<const std::uint8_t> hidden_valid,
                             const MemoryParams& params, const BlockContext& ctx);

struct AnswerUpdate {
  Tensor memory;
  Tensor gate;
  Tensor summary;
};

/// Z = cross_attend(H_a, keys); G = gate(H_a, Z); M = G*H_a + (1-G)*M_prev.
/// `keys` is the freshly updated context memory (full) or the current
/// passage's context states (chime_c).
AnswerUpdate update_answer(const Tensor& previous, const Tensor& hidden, const Tensor& keys,
                           std::span<const std::uint8_t> keys_valid, const MemoryParams& params,
                           const BlockContext& ctx);

struct MemoryState {
  Tensor context;  // undefined for chime_c
  Tensor answer;   // answer-side summary Z_a for chime_a
  std::vector<std::uint8_t> context_valid;  // union of real part-1 positions read so far
  std::size_t passages_read = 0;
};

struct MemoryTraceStep {
  Tensor answer_memory;             // what the decoder would read after this passage
  double mean_context_gate = -1.0;  // -1 when no context gate ran at this step
  double mean_answer_gate = -1.0;   // -1 when no answer gate ran at this step
};

struct ReadResult {
  MemoryState state;
  Tensor decoder_input;  // part2 x d
  std::vector<MemoryTraceStep> trace;
};

/// Reads the encoded passages in order. Passage 1 initializes the memories
/// from its hidden states; each later passage applies the context update
/// and then the answer update. Throws std::invalid_argument when empty or
/// when part lengths differ between passages.
ReadResult read_passages(std::span<const EncodedPassage> passages, std::span<const InstanceTensors> instances,
                         const MemoryParams& params, Variant variant, const BlockContext& ctx);

}  // namespace chime
