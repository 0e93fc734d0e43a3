#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "chime/config.hpp"
#include "chime/decoder.hpp"
#include "chime/encoder.hpp"
#include "chime/instance.hpp"
#include "chime/model.hpp"
#include "chime/records.hpp"
#include "chime/vocab.hpp"

namespace chime::testing {

inline ModelConfig tiny_config(Variant variant = Variant::full, std::uint64_t seed = 0) {
  ModelConfig c;
  c.d_model = 16;
  c.blocks = 2;
  c.heads = 2;
  c.ff_inner = 32;
  c.memory_heads = 2;
  c.memory_ff_inner = 32;
  c.vocab_size = 32;
  c.caps = {3, 4, 2};
  c.passages = 3;
  c.variant = variant;
  c.seed = seed;
  c.precision = Precision::f64;
  c.init_std = 0.2;
  return c;
}

/// Random record whose question/passages/answers respect `caps`, with
/// lengths drawn anywhere from 1 to the cap so padding varies.
inline QARecord random_record(std::mt19937_64& rng, const ModelConfig& c, std::size_t passages) {
  auto len = [&](std::size_t cap) { return std::uniform_int_distribution<std::size_t>(1, cap)(rng); };
  auto tok = [&] {
    return static_cast<TokenId>(
        std::uniform_int_distribution<std::size_t>(kReservedCount, c.vocab_size - 1)(rng));
  };
  auto seq = [&](std::size_t n) {
    std::vector<TokenId> s(n);
    for (auto& t : s) t = tok();
    return s;
  };
  QARecord r;
  r.id = "r" + std::to_string(rng() % 100000);
  r.question = seq(len(c.caps.question));
  for (std::size_t k = 0; k < passages; ++k) r.passages.push_back(seq(len(c.caps.passage)));
  r.answers = {seq(len(c.caps.answer))};
  r.votes = {{1, 1}};
  return r;
}

/// Permission rule written directly from the definition: a row in part 1
/// sees every real part-1 column; a row in part 2 sees every real part-1
/// column and every real part-2 column at or before itself.
inline bool mask_rule(std::size_t part1, std::size_t row, std::size_t col, const std::vector<std::uint8_t>& pad) {
  if (!pad[col]) return false;
  const bool row_in_part1 = row < part1;
  const bool col_in_part1 = col < part1;
  if (row_in_part1) return col_in_part1;
  return col_in_part1 || col <= row;
}

/// Exhaustive search over every answer the beam could emit: bodies of
/// length 0..L-1 closed by the end token, plus unterminated length-L bodies.
/// Scored the same way as beam_decode (end token counted as emitted).
struct ExhaustiveBest {
  std::vector<TokenId> tokens;
  double score = -std::numeric_limits<double>::infinity();
};

inline ExhaustiveBest exhaustive_best(const NextTokenFn& next, const GenerationConfig& config, std::size_t vocab) {
  ExhaustiveBest best;
  auto allowed = [&](TokenId id) {
    return std::find(config.banned.begin(), config.banned.end(), id) == config.banned.end();
  };
  auto consider = [&](const std::vector<TokenId>& body, double log_prob, std::size_t emitted) {
    const double score = log_prob / std::pow(static_cast<double>(emitted), config.length_penalty);
    if (score > best.score || (score == best.score && body < best.tokens)) {
      best.score = score;
      best.tokens = body;
    }
  };
  std::function<void(std::vector<TokenId>&, double)> walk = [&](std::vector<TokenId>& body, double lp) {
    const auto probs = next(body);
    const bool last = body.size() + 1 == config.max_length;
    for (std::size_t id = 0; id < vocab; ++id) {
      const auto t = static_cast<TokenId>(id);
      if (!allowed(t)) continue;
      const double step = probs[id] > 0 ? std::log(probs[id]) : -std::numeric_limits<double>::infinity();
      body.push_back(t);
      if (t == config.end_token) {
        body.pop_back();
        consider(body, lp + step, body.size() + 1);
        body.push_back(t);
      } else if (last) {
        consider(body, lp + step, body.size());
      } else {
        walk(body, lp + step);
      }
      body.pop_back();
    }
  };
  std::vector<TokenId> body;
  walk(body, 0.0);
  return best;
}

/// Next-token model from a random table keyed by the full prefix, so that
/// every prefix gets an independent distribution.
class RandomLanguageModel {
 public:
  RandomLanguageModel(std::uint64_t seed, std::size_t vocab) : seed_(seed), vocab_(vocab) {}

  std::vector<double> operator()(std::span<const TokenId> prefix) const {
    std::uint64_t h = seed_ * 0x9E3779B97F4A7C15ULL + 17;
    for (auto t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 0x100000001B3ULL;
    std::mt19937_64 rng(h);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(vocab_);
    double z = 0.0;
    for (auto& v : p) z += (v = std::pow(e(rng), 2.0));
    for (auto& v : p) v /= z;
    return p;
  }

 private:
  std::uint64_t seed_;
  std::size_t vocab_;
};

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("chime-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace chime::testing
