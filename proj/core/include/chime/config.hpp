#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "chime/instance.hpp"
#include "chime/optim.hpp"
#include "chime/records.hpp"
#include "chime/tensor.hpp"

namespace chime {

/// full: context and answer memories. chime_c: no context memory; the answer
/// memory reads the current passage's context states. chime_a: no answer
/// memory; the answer-side transformer output is decoded directly.
enum class Variant { full, chime_c, chime_a };

enum class Activation { gelu, relu };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);
std::string to_string(Precision p);
Precision precision_from_string(const std::string& name);

struct ModelConfig {
  // Encoder.
  std::size_t d_model = 64;
  std::size_t blocks = 2;
  std::size_t heads = 4;
  std::size_t ff_inner = 256;
  Activation activation = Activation::gelu;
  double dropout = 0.0;
  double layer_norm_eps = 1e-12;

  // Memory-side transformer blocks.
  std::size_t memory_heads = 4;
  std::size_t memory_ff_inner = 256;

  std::size_t vocab_size = 32;
  Caps caps{4, 8, 2};
  std::size_t passages = 5;
  Variant variant = Variant::full;

  // Training.
  AdamWConfig adamw{};
  double peak_lr = 1e-5;
  double warmup_fraction = 0.2;
  std::int64_t total_steps = 0;  // 0: epochs * ceil(questions / grad_accum)
  double clip_norm = 1.0;
  std::size_t epochs = 3;
  std::size_t grad_accum = 1;
  bool per_passage_loss = false;
  double init_std = 0.02;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;

  Layout layout() const { return Layout::from_caps(caps); }

  /// Throws std::invalid_argument naming the first inconsistent field.
  void validate() const;

  /// True when the two configs describe tensors of identical shapes.
  bool same_architecture(const ModelConfig& other) const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ModelConfig load(const std::filesystem::path& path);

  bool operator==(const ModelConfig& other) const;
};

}  // namespace chime
