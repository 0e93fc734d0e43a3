#include "chime/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "chime/errors.hpp"

namespace chime {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::chime_c: return "chime_c";
    case Variant::chime_a: return "chime_a";
  }
  return "full";
}

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "chime_c") return Variant::chime_c;
  if (name == "chime_a") return Variant::chime_a;
  throw std::invalid_argument("unknown variant '" + name + "' (expected full|chime_c|chime_a)");
}

std::string to_string(Activation a) { return a == Activation::gelu ? "gelu" : "relu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + name + "' (expected gelu|relu)");
}

std::string to_string(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

Precision precision_from_string(const std::string& name) {
  if (name == "f64") return Precision::f64;
  if (name == "f32") return Precision::f32;
  throw std::invalid_argument("unknown precision '" + name + "' (expected f32|f64)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid config: " + what); };
  if (d_model == 0) fail("d_model must be positive");
  if (heads == 0 || d_model % heads != 0) fail("heads must divide d_model");
  if (memory_heads == 0 || d_model % memory_heads != 0) fail("memory_heads must divide d_model");
  if (ff_inner == 0 || memory_ff_inner == 0) fail("feed-forward sizes must be positive");
  if (vocab_size <= kReservedCount) fail("vocab_size must exceed the reserved tokens");
  if (passages == 0) fail("passages must be >= 1");
  if (caps.answer == 0) fail("answer cap must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (!(layer_norm_eps > 0)) fail("layer_norm_eps must be positive");
  if (peak_lr < 0) fail("peak_lr must be non-negative");
  if (warmup_fraction < 0 || warmup_fraction > 1) fail("warmup_fraction must be in [0, 1]");
  if (total_steps < 0) fail("total_steps must be >= 0");
  if (!(clip_norm > 0)) fail("clip_norm must be positive");
  if (epochs == 0) fail("epochs must be >= 1");
  if (grad_accum == 0) fail("grad_accum must be >= 1");
  if (!(init_std > 0)) fail("init_std must be positive");
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
  return d_model == o.d_model && blocks == o.blocks && heads == o.heads && ff_inner == o.ff_inner &&
         memory_heads == o.memory_heads && memory_ff_inner == o.memory_ff_inner && vocab_size == o.vocab_size &&
         caps == o.caps && variant == o.variant;
}

std::string ModelConfig::to_json() const {
  json j;
  j["d_model"] = d_model;
  j["blocks"] = blocks;
  j["heads"] = heads;
  j["ff_inner"] = ff_inner;
  j["activation"] = to_string(activation);
  j["dropout"] = dropout;
  j["layer_norm_eps"] = layer_norm_eps;
  j["memory_heads"] = memory_heads;
  j["memory_ff_inner"] = memory_ff_inner;
  j["vocab_size"] = vocab_size;
  j["caps"] = {{"question", caps.question}, {"passage", caps.passage}, {"answer", caps.answer}};
  j["passages"] = passages;
  j["variant"] = to_string(variant);
  j["adamw"] = {{"beta1", adamw.beta1},
                {"beta2", adamw.beta2},
                {"eps", adamw.eps},
                {"weight_decay", adamw.weight_decay}};
  j["peak_lr"] = peak_lr;
  j["warmup_fraction"] = warmup_fraction;
  j["total_steps"] = total_steps;
  j["clip_norm"] = clip_norm;
  j["epochs"] = epochs;
  j["grad_accum"] = grad_accum;
  j["per_passage_loss"] = per_passage_loss;
  j["init_std"] = init_std;
  j["seed"] = seed;
  j["precision"] = to_string(precision);
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  ModelConfig c;
  try {
    // Missing keys keep their defaults so hand-written configs can be partial.
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d_model", c.d_model);
    get("blocks", c.blocks);
    get("heads", c.heads);
    get("ff_inner", c.ff_inner);
    if (j.contains("activation")) c.activation = activation_from_string(j.at("activation").get<std::string>());
    get("dropout", c.dropout);
    get("layer_norm_eps", c.layer_norm_eps);
    get("memory_heads", c.memory_heads);
    get("memory_ff_inner", c.memory_ff_inner);
    get("vocab_size", c.vocab_size);
    if (j.contains("caps")) {
      const auto& caps = j.at("caps");
      c.caps.question = caps.value("question", c.caps.question);
      c.caps.passage = caps.value("passage", c.caps.passage);
      c.caps.answer = caps.value("answer", c.caps.answer);
    }
    get("passages", c.passages);
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("adamw")) {
      const auto& a = j.at("adamw");
      c.adamw.beta1 = a.value("beta1", c.adamw.beta1);
      c.adamw.beta2 = a.value("beta2", c.adamw.beta2);
      c.adamw.eps = a.value("eps", c.adamw.eps);
      c.adamw.weight_decay = a.value("weight_decay", c.adamw.weight_decay);
    }
    get("peak_lr", c.peak_lr);
    get("warmup_fraction", c.warmup_fraction);
    get("total_steps", c.total_steps);
    get("clip_norm", c.clip_norm);
    get("epochs", c.epochs);
    get("grad_accum", c.grad_accum);
    get("per_passage_loss", c.per_passage_loss);
    get("init_std", c.init_std);
    get("seed", c.seed);
    if (j.contains("precision")) c.precision = precision_from_string(j.at("precision").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config field: ") + e.what(), 0);
  }
  c.validate();
  return c;
}

void ModelConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << to_json() << '\n';
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

bool ModelConfig::operator==(const ModelConfig& o) const { return to_json() == o.to_json(); }

}  // namespace chime
