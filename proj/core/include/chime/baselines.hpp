#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chime {

class ChimeModel;
class Vocab;

inline constexpr std::size_t kBaselineSentenceTokens = 120;

/// Splits on '.', '!' or '?' followed by whitespace (or end of text). The
/// terminator stays with its sentence; surrounding whitespace is trimmed and
/// empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Every sentence of every review, in review order.
std::vector<std::string> collect_sentences(std::span<const std::string> reviews);

/// Keeps the first `max_tokens` tokens, re-joined with spaces when cut.
std::string truncate_tokens(const std::string& sentence, std::size_t max_tokens = kBaselineSentenceTokens);

/// Uniform pick over all sentences of all reviews. Empty when there are none.
std::string random_sentence_baseline(std::span<const std::string> reviews, std::mt19937_64& rng);

using Embedder = std::function<std::vector<double>(const std::string&)>;

/// Cosine similarity; a zero vector on either side scores -1.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Sentence with the highest cosine to the question; ties keep the first.
std::string retrieval_sentence_baseline(const std::string& question, std::span<const std::string> reviews,
                                        const Embedder& embedder);

/// Mean of the model's token embeddings over the tokenized text. Unknown
/// words map to [UNK]; empty text gives a zero vector.
Embedder mean_embedding_embedder(const ChimeModel& model, const Vocab& vocab);

}  // namespace chime
