#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "chime/decoder.hpp"
#include "chime/instance.hpp"
#include "chime/model.hpp"
#include "chime/ops.hpp"
#include "support.hpp"

namespace chime {
namespace {

using testing::exhaustive_best;
using testing::random_record;
using testing::RandomLanguageModel;
using testing::tiny_config;

std::vector<double> softmax_row(const Tensor& logits, std::size_t row) {
  const auto p = softmax(slice_rows(logits, row, 1), 1);
  return {p.data().begin(), p.data().end()};
}

TEST(ProjectVocab, ZeroWeightsGiveUniform) {
  const auto m = Tensor::full({3, 4}, 0.7);
  const auto logits = project_vocab(m, Tensor::zeros({4, 5}), Tensor::zeros({5}));
  EXPECT_EQ(logits.shape(), (Shape{3, 5}));
  for (std::size_t r = 0; r < 3; ++r)
    for (double p : softmax_row(logits, r)) EXPECT_NEAR(p, 0.2, 1e-15);
}

TEST(ProjectVocab, TwoClassHandCase) {
  const auto m = Tensor::from({1, 2}, {1.0, 2.0});
  const auto w = Tensor::from({2, 2}, {0.5, -1.0, 0.25, 1.0});
  const auto b = Tensor::from({2}, {0.1, -0.2});
  const auto logits = project_vocab(m, w, b);
  // z0 = 0.5 + 0.5 + 0.1 = 1.1, z1 = -1 + 2 - 0.2 = 0.8
  EXPECT_NEAR(logits.at(0, 0), 1.1, 1e-15);
  EXPECT_NEAR(logits.at(0, 1), 0.8, 1e-15);
  const auto p = softmax_row(logits, 0);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-0.3)), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(0.3)), 1e-15);
}

TEST(ProjectVocab, ShapeMismatchThrows) {
  EXPECT_THROW(project_vocab(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}), Tensor::zeros({5})),
               std::invalid_argument);
  EXPECT_THROW(project_vocab(Tensor::zeros({2, 4}), Tensor::zeros({4, 5}), Tensor::zeros({4})),
               std::invalid_argument);
}

TEST(AnswerLoss, PerfectPredictionIsZero) {
  const auto logits = Tensor::from({2, 3}, {1000, 0, 0, 0, 0, 1000});
  const std::vector<TokenId> targets{0, 2};
  const std::vector<std::uint8_t> mask{1, 1};
  EXPECT_EQ(answer_loss(logits, targets, mask).item(), 0.0);
}

TEST(AnswerLoss, UniformFourWayIsLnFour) {
  const auto logits = Tensor::zeros({3, 4});
  const std::vector<TokenId> targets{0, 3, 1};
  const std::vector<std::uint8_t> mask{1, 1, 1};
  EXPECT_NEAR(answer_loss(logits, targets, mask).item(), 1.3862943611198906, 1e-15);
}

TEST(AnswerLoss, MaskedPositionsDoNotCount) {
  const auto logits = Tensor::from({2, 2}, {0.0, 0.0, 5.0, -5.0});
  const std::vector<TokenId> targets{0, 1};
  const std::vector<std::uint8_t> only_first{1, 0};
  EXPECT_NEAR(answer_loss(logits, targets, only_first).item(), std::log(2.0), 1e-15);
  const auto symmetric = Tensor::zeros({2, 2});
  const std::vector<std::uint8_t> both{1, 1};
  EXPECT_NEAR(answer_loss(symmetric, targets, both).item(), answer_loss(symmetric, targets, only_first).item(),
              1e-15);
}

TEST(AnswerLoss, AllMaskedThrows) {
  const std::vector<TokenId> targets{0, 1};
  const std::vector<std::uint8_t> none{0, 0};
  EXPECT_THROW(answer_loss(Tensor::zeros({2, 2}), targets, none), std::invalid_argument);
}

struct ModelFixture {
  ModelConfig config;
  ChimeModel model;
  QARecord record;

  explicit ModelFixture(std::uint64_t seed, std::size_t passages = 3, Variant variant = Variant::full)
      : config(make_config(seed, passages, variant)), model(config) {
    std::mt19937_64 rng(seed + 1000);
    record = random_record(rng, config, passages);
  }

  static ModelConfig make_config(std::uint64_t seed, std::size_t passages, Variant variant) {
    auto c = tiny_config(variant, seed);
    c.passages = passages;
    c.caps.answer = 3;
    return c;
  }
};

TEST(StepDistribution, IsAProbabilityVector) {
  ModelFixture fx(1);
  for (std::vector<TokenId> prefix : {std::vector<TokenId>{}, std::vector<TokenId>{7}, std::vector<TokenId>{7, 9, 11}}) {
    const auto p = step_distribution(fx.model, fx.record.question, fx.record.passages, prefix);
    ASSERT_EQ(p.size(), fx.config.vocab_size);
    for (double v : p) EXPECT_GE(v, 0.0);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(StepDistribution, OverLongPrefixThrows) {
  ModelFixture fx(2);
  const std::vector<TokenId> prefix(fx.config.caps.answer + 1, 7);
  EXPECT_THROW(step_distribution(fx.model, fx.record.question, fx.record.passages, prefix), std::invalid_argument);
}

TEST(StepDistribution, AgreesWithTeacherForcedRows) {
  ModelFixture fx(3);
  const std::vector<TokenId> answer{7, 9, 11};
  const auto group = assemble_group(fx.record, answer, fx.config.caps);
  const auto logits = fx.model.forward(group).logits;
  for (std::size_t len = 0; len <= answer.size(); ++len) {
    const std::vector<TokenId> prefix(answer.begin(), answer.begin() + static_cast<std::ptrdiff_t>(len));
    const auto p = step_distribution(fx.model, fx.record.question, fx.record.passages, prefix);
    const auto expected = softmax_row(logits, len);
    for (std::size_t v = 0; v < p.size(); ++v) EXPECT_NEAR(p[v], expected[v], 1e-12);
  }
}

TEST(StepDistribution, ExtendingThePrefixKeepsEarlierRows) {
  ModelFixture fx(4);
  const std::vector<TokenId> a{7, 9}, b{7, 20};
  const auto la = fx.model.forward(assemble_group(fx.record, a, fx.config.caps)).logits;
  const auto lb = fx.model.forward(assemble_group(fx.record, b, fx.config.caps)).logits;
  for (std::size_t row = 0; row < 2; ++row)
    for (std::size_t v = 0; v < fx.config.vocab_size; ++v) EXPECT_NEAR(la.at(row, v), lb.at(row, v), 1e-10);
}

TEST(StepDistribution, SinglePassageDecodesFromEncoderStates) {
  ModelFixture fx(5, 1);
  const std::vector<TokenId> prefix{8};
  const auto p = step_distribution(fx.model, fx.record.question, fx.record.passages, prefix);
  const auto inst = assemble_prefix(fx.record.question, fx.record.passages[0], prefix, fx.config.caps);
  const auto enc = encode(inst, fx.model.encoder(), fx.model.block_context());
  const auto direct =
      softmax_row(project_vocab(enc.answer, fx.model.output().weight, fx.model.output().bias), prefix.size());
  for (std::size_t v = 0; v < p.size(); ++v) EXPECT_EQ(p[v], direct[v]);
}

NextTokenFn table(std::vector<std::vector<double>> rows) {
  return [rows = std::move(rows)](std::span<const TokenId> prefix) { return rows.at(prefix.size()); };
}

TEST(Greedy, MaxLengthOneEmitsOneToken) {
  GenerationConfig g;
  g.max_length = 1;
  const auto out = greedy_decode(table({{0, 0, 0.1, 0.1, 0.8}}), g);
  EXPECT_EQ(out, std::vector<TokenId>{4});
}

TEST(Greedy, ImmediateEndTokenGivesEmptyAnswer) {
  GenerationConfig g;
  g.max_length = 3;
  EXPECT_TRUE(greedy_decode(table({{0, 0, 0.7, 0.2, 0.1}}), g).empty());
}

TEST(Greedy, StopsAtEndToken) {
  GenerationConfig g;
  g.max_length = 3;
  const auto out = greedy_decode(table({{0, 0, 0.1, 0.2, 0.7}, {0, 0, 0.1, 0.6, 0.3}, {0, 0, 0.9, 0.05, 0.05}}), g);
  EXPECT_EQ(out, (std::vector<TokenId>{4, 3}));
}

TEST(Greedy, TiesGoToLowestIdAndBannedIdsAreSkipped) {
  GenerationConfig g;
  g.max_length = 1;
  EXPECT_EQ(greedy_decode(table({{0.9, 0.05, 0, 0.025, 0.025}}), g), std::vector<TokenId>{3});
}

TEST(Greedy, InvalidConfigThrows) {
  GenerationConfig g;
  g.max_length = 0;
  EXPECT_THROW(greedy_decode(table({{0, 0, 1}}), g), std::invalid_argument);
  g.max_length = 1;
  g.beam_width = 0;
  EXPECT_THROW(beam_decode(table({{0, 0, 1}}), g), std::invalid_argument);
}

TEST(Greedy, ModelDecodeIsDeterministic) {
  ModelFixture fx(6);
  GenerationConfig g;
  g.max_length = fx.config.caps.answer;
  EXPECT_EQ(greedy_decode(fx.model, fx.record, g), greedy_decode(fx.model, fx.record, g));
}

TEST(Beam, WidthOneMatchesGreedy) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RandomLanguageModel lm(seed, 7);
    GenerationConfig g;
    g.max_length = 1 + seed % 4;
    g.beam_width = 1;
    const auto beams = beam_decode(lm, g);
    ASSERT_EQ(beams.size(), 1u);
    ASSERT_EQ(beams.front().tokens, greedy_decode(lm, g)) << "seed " << seed;
  }
}

TEST(Beam, FullWidthEqualsExhaustiveSearch) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t vocab = 4 + seed % 3;
    const RandomLanguageModel lm(seed, vocab);
    GenerationConfig g;
    g.max_length = 1 + seed % 4;
    g.beam_width = 1;
    for (std::size_t i = 0; i < g.max_length; ++i) g.beam_width *= vocab;
    const auto beams = beam_decode(lm, g);
    const auto oracle = exhaustive_best(lm, g, vocab);
    ASSERT_EQ(beams.front().tokens, oracle.tokens) << "seed " << seed;
    ASSERT_NEAR(beams.front().score, oracle.score, 1e-12);
  }
}

TEST(Beam, ScoresAreSortedAndNormalized) {
  const RandomLanguageModel lm(3, 6);
  GenerationConfig g;
  g.max_length = 4;
  const auto beams = beam_decode(lm, g);
  ASSERT_FALSE(beams.empty());
  for (std::size_t i = 1; i < beams.size(); ++i) EXPECT_GE(beams[i - 1].score, beams[i].score);
  for (const auto& h : beams) {
    const auto emitted = h.tokens.size() + (h.ended ? 1 : 0);
    EXPECT_NEAR(h.score, h.log_prob / static_cast<double>(emitted), 1e-15);
  }
}

TEST(Beam, FullWidthScoreBoundsEveryWidth) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const RandomLanguageModel lm(seed, 5);
    GenerationConfig g;
    g.max_length = 3;
    g.beam_width = 125;
    const double best = beam_decode(lm, g).front().score;
    for (std::size_t w = 1; w <= 8; ++w) {
      g.beam_width = w;
      ASSERT_LE(beam_decode(lm, g).front().score, best + 1e-15);
    }
  }
}

TEST(Beam, HandTwoStepCase) {
  // Step 1: token 3 (0.6) vs token 4 (0.4); after 3 the end token is unlikely.
  const NextTokenFn next = [](std::span<const TokenId> prefix) -> std::vector<double> {
    if (prefix.empty()) return {0, 0, 0.0, 0.6, 0.4};
    if (prefix[0] == 3) return {0, 0, 0.1, 0.5, 0.4};
    return {0, 0, 0.9, 0.05, 0.05};
  };
  GenerationConfig g;
  g.max_length = 2;
  g.beam_width = 2;
  const auto beams = beam_decode(next, g);
  // [4]+end: log(0.4*0.9)/2 = -0.5108; [3,3]: log(0.3)/2 = -0.6020; [3,4]: log(0.24)/2.
  ASSERT_GE(beams.size(), 2u);
  EXPECT_EQ(beams[0].tokens, std::vector<TokenId>{4});
  EXPECT_TRUE(beams[0].ended);
  EXPECT_NEAR(beams[0].score, std::log(0.36) / 2.0, 1e-15);
  EXPECT_EQ(beams[1].tokens, (std::vector<TokenId>{3, 3}));
}

TEST(Beam, ModelDecodeUsesDefaultWidthThree) {
  ModelFixture fx(7);
  GenerationConfig g;
  EXPECT_EQ(g.beam_width, 3u);
  g.max_length = fx.config.caps.answer;
  const auto a = beam_decode(fx.model, fx.record, g);
  const auto b = beam_decode(fx.model, fx.record, g);
  ASSERT_FALSE(a.empty());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].score, b[i].score);
  }
  for (const auto& h : a) EXPECT_LE(h.tokens.size(), g.max_length);
}

}  // namespace
}  // namespace chime
