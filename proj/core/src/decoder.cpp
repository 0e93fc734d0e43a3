#include "chime/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "chime/instance.hpp"
#include "chime/ops.hpp"

namespace chime {

namespace {

bool is_banned(const GenerationConfig& config, TokenId id) {
  return std::find(config.banned.begin(), config.banned.end(), id) != config.banned.end();
}

double normalized(double log_prob, std::size_t emitted, double penalty) {
  return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(emitted, 1)), penalty);
}

bool better(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

Tensor project_vocab(const Tensor& memory, const Tensor& weight, const Tensor& bias) {
  if (memory.rank() != 2 || weight.rank() != 2 || memory.dim(1) != weight.dim(0) || bias.numel() != weight.dim(1)) {
    throw std::invalid_argument("project_vocab: shapes " + shape_string(memory.shape()) + " x " +
                                shape_string(weight.shape()) + " + " + shape_string(bias.shape()) + " do not compose");
  }
  return add_row(matmul(memory, weight), bias);
}

Tensor answer_loss(const Tensor& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> target_mask) {
  return masked_cross_entropy(logits, targets, target_mask);
}

void GenerationConfig::validate() const {
  if (max_length == 0) throw std::invalid_argument("generation: max_length must be >= 1");
  if (beam_width == 0) throw std::invalid_argument("generation: beam_width must be >= 1");
}

std::vector<double> step_distribution(const ChimeModel& model, std::span<const TokenId> question,
                                      std::span<const std::vector<TokenId>> passages,
                                      std::span<const TokenId> prefix) {
  const auto& caps = model.config().caps;
  if (prefix.size() > caps.answer) {
    throw std::invalid_argument("step_distribution: prefix of " + std::to_string(prefix.size()) +
                                " tokens leaves no room under the answer cap " + std::to_string(caps.answer));
  }
  std::vector<InstanceTensors> instances;
  instances.reserve(passages.size());
  for (const auto& p : passages) instances.push_back(assemble_prefix(question, p, prefix, caps));

  NoGradGuard no_grad;
  PrecisionGuard precision(model.config().precision);
  const auto fwd = model.forward(instances);
  const auto row = slice_rows(fwd.read.decoder_input, prefix.size(), 1);
  const auto probs = softmax(project_vocab(row, model.output().weight, model.output().bias), 1);
  return {probs.data().begin(), probs.data().end()};
}

NextTokenFn model_next_token(const ChimeModel& model, const QARecord& record) {
  return [&model, &record](std::span<const TokenId> prefix) {
    return step_distribution(model, record.question, record.passages, prefix);
  };
}

std::vector<TokenId> greedy_decode(const NextTokenFn& next, const GenerationConfig& config) {
  config.validate();
  std::vector<TokenId> out;
  while (out.size() < config.max_length) {
    const auto probs = next(out);
    TokenId best = -1;
    for (std::size_t id = 0; id < probs.size(); ++id) {
      const auto tid = static_cast<TokenId>(id);
      if (is_banned(config, tid)) continue;
      if (best < 0 || probs[id] > probs[static_cast<std::size_t>(best)]) best = tid;
    }
    if (best < 0 || best == config.end_token) break;
    out.push_back(best);
  }
  return out;
}

std::vector<TokenId> greedy_decode(const ChimeModel& model, const QARecord& record, const GenerationConfig& config) {
  return greedy_decode(model_next_token(model, record), config);
}

std::vector<BeamHypothesis> beam_decode(const NextTokenFn& next, const GenerationConfig& config) {
  config.validate();
  struct Candidate {
    std::vector<TokenId> tokens;  // includes the end token when ended
    double log_prob;
  };
  std::vector<Candidate> alive{{{}, 0.0}};
  std::vector<BeamHypothesis> finished;

  for (std::size_t step = 0; step < config.max_length && !alive.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (const auto& h : alive) {
      const auto probs = next(h.tokens);
      for (std::size_t id = 0; id < probs.size(); ++id) {
        const auto tid = static_cast<TokenId>(id);
        if (is_banned(config, tid)) continue;
        auto tokens = h.tokens;
        tokens.push_back(tid);
        const double lp = probs[id] > 0 ? std::log(probs[id]) : -std::numeric_limits<double>::infinity();
        candidates.push_back({std::move(tokens), h.log_prob + lp});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.tokens < b.tokens;
    });
    if (candidates.size() > config.beam_width) candidates.resize(config.beam_width);

    alive.clear();
    const bool last_step = step + 1 == config.max_length;
    for (auto& c : candidates) {
      const bool ended = c.tokens.back() == config.end_token;
      if (ended || last_step) {
        BeamHypothesis h;
        h.ended = ended;
        h.log_prob = c.log_prob;
        h.score = normalized(c.log_prob, c.tokens.size(), config.length_penalty);
        h.tokens = std::move(c.tokens);
        if (ended) h.tokens.pop_back();
        finished.push_back(std::move(h));
      } else {
        alive.push_back(std::move(c));
      }
    }
  }
  std::sort(finished.begin(), finished.end(), better);
  return finished;
}

std::vector<BeamHypothesis> beam_decode(const ChimeModel& model, const QARecord& record,
                                        const GenerationConfig& config) {
  return beam_decode(model_next_token(model, record), config);
}

}  // namespace chime
