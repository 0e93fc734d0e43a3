#include "chime/baselines.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "chime/model.hpp"
#include "chime/vocab.hpp"

namespace chime {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
    auto piece = trim(text.substr(start, i + 1 - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    start = i + 1;
  }
  auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

std::vector<std::string> collect_sentences(std::span<const std::string> reviews) {
  std::vector<std::string> out;
  for (const auto& r : reviews) {
    auto s = split_sentences(r);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

std::string truncate_tokens(const std::string& sentence, std::size_t max_tokens) {
  auto tokens = tokenize(sentence);
  if (tokens.size() <= max_tokens) return sentence;
  tokens.resize(max_tokens);
  return join_tokens(tokens);
}

std::string random_sentence_baseline(std::span<const std::string> reviews, std::mt19937_64& rng) {
  const auto sentences = collect_sentences(reviews);
  if (sentences.empty()) {
    spdlog::warn("random baseline: no sentences in the reviews");
    return {};
  }
  std::uniform_int_distribution<std::size_t> pick(0, sentences.size() - 1);
  return truncate_tokens(sentences[pick(rng)]);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: sizes " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return -1.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string retrieval_sentence_baseline(const std::string& question, std::span<const std::string> reviews,
                                        const Embedder& embedder) {
  const auto sentences = collect_sentences(reviews);
  if (sentences.empty()) {
    spdlog::warn("retrieval baseline: no sentences in the reviews");
    return {};
  }
  const auto q = embedder(question);
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto sim = cosine_similarity(q, embedder(sentences[i]));
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return truncate_tokens(sentences[best]);
}

Embedder mean_embedding_embedder(const ChimeModel& model, const Vocab& vocab) {
  const auto& table = model.encoder().token_embedding;
  if (table.dim(0) != vocab.size()) {
    throw std::invalid_argument("mean_embedding_embedder: model vocabulary " + std::to_string(table.dim(0)) +
                                " != vocab file size " + std::to_string(vocab.size()));
  }
  return [&table, &vocab](const std::string& text) {
    const auto d = table.dim(1);
    std::vector<double> out(d, 0.0);
    const auto ids = vocab.encode_text(text);
    if (ids.empty()) return out;
    const auto data = table.data();
    for (const auto id : ids) {
      for (std::size_t j = 0; j < d; ++j) out[j] += data[static_cast<std::size_t>(id) * d + j];
    }
    for (auto& v : out) v /= static_cast<double>(ids.size());
    return out;
  };
}

}  // namespace chime
