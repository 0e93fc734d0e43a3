#include "chime/synthetic.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace chime {

namespace {

constexpr const char* kKeywords[] = {"what", "is", "key", "val", "opinion", "yes", "no", "?"};
constexpr std::size_t kKeywordCount = std::size(kKeywords);

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::string to_string(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::key_lookup: return "key";
    case SyntheticTask::majority_opinion: return "majority";
    case SyntheticTask::mixed: return "mixed";
  }
  return "mixed";
}

SyntheticTask synthetic_task_from_string(const std::string& name) {
  if (name == "key") return SyntheticTask::key_lookup;
  if (name == "majority") return SyntheticTask::majority_opinion;
  if (name == "mixed") return SyntheticTask::mixed;
  throw std::invalid_argument("unknown synthetic task '" + name + "' (expected key|majority|mixed)");
}

SyntheticCorpus gen_synthetic(const SyntheticConfig& config) {
  if (config.vocab_size < 16) throw std::invalid_argument("gen_synthetic: vocab_size must be >= 16");
  if (config.passages < 1) throw std::invalid_argument("gen_synthetic: need at least one passage");
  if (config.questions < 1) throw std::invalid_argument("gen_synthetic: need at least one question");
  if (config.passage_length < 4) throw std::invalid_argument("gen_synthetic: passage_length must be >= 4");

  SyntheticCorpus corpus;
  for (const char* k : kKeywords) corpus.vocab.add(k);
  const std::size_t filler_count = config.vocab_size - kReservedCount - kKeywordCount;
  std::vector<TokenId> fillers;
  for (std::size_t i = 0; i < filler_count; ++i) fillers.push_back(corpus.vocab.add("w" + std::to_string(i)));

  const auto id = [&](const char* t) { return corpus.vocab.id(t); };
  const TokenId what = id("what"), is = id("is"), key = id("key"), val = id("val");
  const TokenId opinion = id("opinion"), yes = id("yes"), no = id("no");

  Sampler rng(config.seed);
  auto filler = [&] { return fillers[rng.below(fillers.size())]; };
  auto noise_passage = [&] {
    std::vector<TokenId> p(config.passage_length);
    for (auto& t : p) t = filler();
    return p;
  };
  auto plant = [&](std::vector<TokenId>& passage, std::initializer_list<TokenId> phrase) {
    const auto offset = rng.below(passage.size() - phrase.size() + 1);
    std::copy(phrase.begin(), phrase.end(), passage.begin() + static_cast<std::ptrdiff_t>(offset));
  };

  for (std::size_t q = 0; q < config.questions; ++q) {
    SyntheticTask task = config.task;
    if (task == SyntheticTask::mixed) task = q % 2 == 0 ? SyntheticTask::key_lookup : SyntheticTask::majority_opinion;

    QARecord rec;
    rec.id = "synth-" + std::to_string(config.seed) + "-" + std::to_string(q);
    TokenId gold = kUnk;
    TokenId distractor = kUnk;

    if (task == SyntheticTask::key_lookup) {
      const TokenId k = filler();
      gold = filler();
      rec.question = {what, is, key, k};
      const auto gold_passage = rng.below(config.passages);
      for (std::size_t p = 0; p < config.passages; ++p) {
        auto passage = noise_passage();
        if (p == gold_passage) {
          plant(passage, {key, k, val, gold});
        } else if (rng.below(2) == 0) {
          TokenId other = filler();
          while (other == k) other = filler();
          plant(passage, {key, other, val, filler()});
        }
        rec.passages.push_back(std::move(passage));
      }
      distractor = filler();
    } else {
      rec.question = {what, is, opinion, filler()};
      const bool majority_yes = rng.below(2) == 0;
      const auto agree = rng.between(config.passages / 2 + 1, config.passages);
      std::vector<bool> labels(config.passages, false);
      for (std::size_t i = 0; i < agree; ++i) labels[i] = true;
      std::shuffle(labels.begin(), labels.end(), rng.engine());
      for (std::size_t p = 0; p < config.passages; ++p) {
        auto passage = noise_passage();
        const bool says_yes = labels[p] == majority_yes;
        plant(passage, {opinion, says_yes ? yes : no});
        rec.passages.push_back(std::move(passage));
      }
      gold = majority_yes ? yes : no;
      distractor = majority_yes ? no : yes;
    }

    const auto answer_count = 1 + rng.between(1, 2);
    const auto gold_index = rng.below(answer_count);
    for (std::size_t a = 0; a < answer_count; ++a) {
      if (a == gold_index) {
        const int total = static_cast<int>(rng.between(1, 5));
        rec.answers.push_back({gold});
        rec.votes.push_back({total, total});
      } else {
        const int total = static_cast<int>(rng.between(1, 5));
        const int positive = static_cast<int>(rng.below(static_cast<std::size_t>(total)));
        rec.answers.push_back({a % 2 == 0 ? distractor : filler()});
        rec.votes.push_back({positive, total});
      }
    }
    corpus.records.push_back(std::move(rec));
    corpus.tasks.push_back(task);
  }
  return corpus;
}

}  // namespace chime
