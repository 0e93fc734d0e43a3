#include "chime/memory.hpp"

#include <numeric>
#include <stdexcept>

#include "chime/ops.hpp"

namespace chime {

namespace {

double mean_value(const Tensor& t) {
  const auto data = t.data();
  return std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

}  // namespace

GateParams GateParams::create(ParamFactory& f, const std::string& prefix, std::size_t d) {
  return {f.weight(prefix + ".w_state", {d, d}), f.weight(prefix + ".w_summary", {d, d}),
          f.bias(prefix + ".bias", d)};
}

MemoryParams MemoryParams::create(ParamFactory& f, const ModelConfig& config) {
  const auto d = config.d_model;
  MemoryParams p;
  if (config.variant != Variant::chime_c) {
    p.context_block =
        TransformerBlockParams::create(f, "memory.context_block", d, config.memory_heads, config.memory_ff_inner);
    p.context_gate = GateParams::create(f, "memory.context_gate", d);
  }
  p.answer_block =
      TransformerBlockParams::create(f, "memory.answer_block", d, config.memory_heads, config.memory_ff_inner);
  if (config.variant != Variant::chime_a) p.answer_gate = GateParams::create(f, "memory.answer_gate", d);
  return p;
}

Tensor cross_attend(const Tensor& query, const Tensor& keys, std::span<const std::uint8_t> key_valid,
                    const TransformerBlockParams& params, const BlockContext& ctx) {
  if (key_valid.empty()) return transformer_block(query, keys, params, nullptr, ctx);
  if (key_valid.size() != keys.dim(0)) throw std::invalid_argument("cross_attend: key mask length mismatch");
  const auto mask = AttentionMask::key_padding(query.dim(0), key_valid);
  return transformer_block(query, keys, params, &mask, ctx);
}

Tensor gate(const Tensor& state, const Tensor& summary, const GateParams& params) {
  require_same_shape(state, summary, "gate");
  return sigmoid(add_row(add(matmul(state, params.w_state), matmul(summary, params.w_summary)), params.bias));
}

Tensor gated_mix(const Tensor& g, const Tensor& retained, const Tensor& incoming) {
  require_same_shape(g, retained, "gated_mix");
  require_same_shape(g, incoming, "gated_mix");
  return add(mul(g, retained), mul(one_minus(g), incoming));
}

ContextUpdate update_context(const Tensor& previous, const Tensor& hidden, std::span<const std::uint8_t> hidden_valid,
                             const MemoryParams& params, const BlockContext& ctx) {
  require_same_shape(previous, hidden, "update_context");
  if (!params.context_block || !params.context_gate) {
    throw std::invalid_argument("update_context: this variant has no context memory");
  }
  ContextUpdate out;
  out.summary = cross_attend(previous, hidden, hidden_valid, *params.context_block, ctx);
  out.gate = gate(previous, out.summary, *params.context_gate);
  out.memory = gated_mix(out.gate, previous, hidden);
  return out;
}

AnswerUpdate update_answer(const Tensor& previous, const Tensor& hidden, const Tensor& keys,
                           std::span<const std::uint8_t> keys_valid, const MemoryParams& params,
                           const BlockContext& ctx) {
  require_same_shape(previous, hidden, "update_answer");
  if (!params.answer_gate) throw std::invalid_argument("update_answer: this variant has no answer memory");
  AnswerUpdate out;
  out.summary = cross_attend(hidden, keys, keys_valid, params.answer_block, ctx);
  out.gate = gate(hidden, out.summary, *params.answer_gate);
  out.memory = gated_mix(out.gate, hidden, previous);
  return out;
}

ReadResult read_passages(std::span<const EncodedPassage> passages, std::span<const InstanceTensors> instances,
                         const MemoryParams& params, Variant variant, const BlockContext& ctx) {
  if (passages.empty()) throw std::invalid_argument("read_passages: need at least one passage");
  if (instances.size() != passages.size()) throw std::invalid_argument("read_passages: instance count mismatch");
  const auto part1 = instances.front().part1_length;
  const auto part2 = instances.front().part2_length;
  for (const auto& inst : instances) {
    if (inst.part1_length != part1 || inst.part2_length != part2) {
      throw std::invalid_argument("read_passages: part lengths must match across passages");
    }
  }

  ReadResult result;
  auto& state = result.state;
  for (std::size_t k = 0; k < passages.size(); ++k) {
    const auto& enc = passages[k];
    const auto valid = instances[k].part1_pad_mask();
    MemoryTraceStep step;

    if (k == 0) {
      state.context_valid.assign(valid.begin(), valid.end());
      if (variant != Variant::chime_c) state.context = enc.context;
      state.answer = enc.answer;
      if (variant == Variant::chime_a) {
        state.answer = cross_attend(enc.answer, state.context, state.context_valid, params.answer_block, ctx);
      }
    } else {
      for (std::size_t i = 0; i < part1; ++i) state.context_valid[i] = state.context_valid[i] || valid[i];
      switch (variant) {
        case Variant::full: {
          auto c = update_context(state.context, enc.context, valid, params, ctx);
          state.context = c.memory;
          auto a = update_answer(state.answer, enc.answer, state.context, state.context_valid, params, ctx);
          state.answer = a.memory;
          step.mean_context_gate = mean_value(c.gate);
          step.mean_answer_gate = mean_value(a.gate);
          break;
        }
        case Variant::chime_c: {
          auto a = update_answer(state.answer, enc.answer, enc.context, valid, params, ctx);
          state.answer = a.memory;
          step.mean_answer_gate = mean_value(a.gate);
          break;
        }
        case Variant::chime_a: {
          auto c = update_context(state.context, enc.context, valid, params, ctx);
          state.context = c.memory;
          state.answer = cross_attend(enc.answer, state.context, state.context_valid, params.answer_block, ctx);
          step.mean_context_gate = mean_value(c.gate);
          break;
        }
      }
    }
    state.passages_read = k + 1;
    step.answer_memory = state.answer;
    result.trace.push_back(std::move(step));
  }
  result.decoder_input = state.answer;
  return result;
}

}  // namespace chime
