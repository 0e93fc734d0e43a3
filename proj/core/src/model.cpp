#include "chime/model.hpp"

#include <stdexcept>

#include "chime/decoder.hpp"
#include "chime/ops.hpp"

namespace chime {

OutputParams OutputParams::create(ParamFactory& f, const ModelConfig& config) {
  return {f.weight("output.weight", {config.d_model, config.vocab_size}), f.bias("output.bias", config.vocab_size)};
}

ChimeModel::ChimeModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  ParamFactory factory(params_, rng, config_.init_std);
  encoder_ = EncoderParams::create(factory, config_);
  memory_ = MemoryParams::create(factory, config_);
  output_ = OutputParams::create(factory, config_);
}

std::size_t ChimeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

BlockContext ChimeModel::block_context(std::mt19937_64* rng) const {
  BlockContext ctx;
  ctx.activation = config_.activation;
  ctx.layer_norm_eps = config_.layer_norm_eps;
  ctx.dropout = config_.dropout;
  ctx.rng = rng;
  return ctx;
}

ChimeModel::Forward ChimeModel::forward(std::span<const InstanceTensors> instances, std::mt19937_64* rng) const {
  if (instances.empty()) throw std::invalid_argument("forward: no passages");
  const auto ctx = block_context(rng);
  Forward out;
  out.encoded.reserve(instances.size());
  for (const auto& inst : instances) out.encoded.push_back(encode(inst, encoder_, ctx));
  out.read = read_passages(out.encoded, instances, memory_, config_.variant, ctx);
  out.logits = project_vocab(out.read.decoder_input, output_.weight, output_.bias);
  return out;
}

Tensor ChimeModel::loss(std::span<const InstanceTensors> instances, std::mt19937_64* rng) const {
  const auto fwd = forward(instances, rng);
  const auto& targets = instances.front().targets;
  const auto& mask = instances.front().target_mask;
  if (!config_.per_passage_loss || fwd.read.trace.size() == 1) return answer_loss(fwd.logits, targets, mask);

  Tensor total = answer_loss(fwd.logits, targets, mask);
  for (std::size_t k = 0; k + 1 < fwd.read.trace.size(); ++k) {
    const auto logits = project_vocab(fwd.read.trace[k].answer_memory, output_.weight, output_.bias);
    total = add(total, answer_loss(logits, targets, mask));
  }
  return scale(total, 1.0 / static_cast<double>(fwd.read.trace.size()));
}

void ChimeModel::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace chime
