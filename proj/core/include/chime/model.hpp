#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "chime/config.hpp"
#include "chime/encoder.hpp"
#include "chime/memory.hpp"
#include "chime/optim.hpp"

namespace chime {

/// Vocabulary projection on top of the answer memory.
struct OutputParams {
  Tensor weight;  // d x V
  Tensor bias;    // V

  static OutputParams create(ParamFactory& f, const ModelConfig& config);
};

/// Encoder + hierarchical memory + vocabulary projection. Parameters are
/// created in a fixed order from config.seed, so two models built from the
/// same config are identical.
class ChimeModel {
 public:
  explicit ChimeModel(const ModelConfig& config);

  ChimeModel(const ChimeModel&) = delete;
  ChimeModel& operator=(const ChimeModel&) = delete;
  ChimeModel(ChimeModel&&) = default;
  ChimeModel& operator=(ChimeModel&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  std::span<Parameter> parameters() noexcept { return params_; }
  std::span<const Parameter> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

  const EncoderParams& encoder() const noexcept { return encoder_; }
  const MemoryParams& memory() const noexcept { return memory_; }
  const OutputParams& output() const noexcept { return output_; }

  /// Dropout is active only when `rng` is non-null.
  BlockContext block_context(std::mt19937_64* rng = nullptr) const;

  struct Forward {
    std::vector<EncodedPassage> encoded;
    ReadResult read;
    Tensor logits;  // part2 x V
  };

  /// Encodes every passage instance, reads them through the memory and
  /// projects the final answer memory onto the vocabulary.
  Forward forward(std::span<const InstanceTensors> instances, std::mt19937_64* rng = nullptr) const;

  /// Teacher-forced cross-entropy of the final decode, or the mean over
  /// every passage step when config.per_passage_loss is set.
  Tensor loss(std::span<const InstanceTensors> instances, std::mt19937_64* rng = nullptr) const;

  void zero_grad();

 private:
  ModelConfig config_;
  std::vector<Parameter> params_;
  EncoderParams encoder_;
  MemoryParams memory_;
  OutputParams output_;
};

}  // namespace chime
