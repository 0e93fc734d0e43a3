#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "chime/memory.hpp"
#include "chime/model.hpp"
#include "chime/ops.hpp"
#include "support.hpp"

namespace chime {
namespace {

using testing::random_record;
using testing::tiny_config;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor identity(std::size_t d, double scale = 1.0) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = scale;
  return Tensor::from({d, d}, std::move(v));
}

GateParams constant_gate(std::size_t d, double bias) {
  return {Tensor::zeros({d, d}), Tensor::zeros({d, d}), Tensor::full({d}, bias)};
}

void expect_equal(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]) << "entry " << i;
}

TEST(Gate, ZeroParamsGiveHalf) {
  std::mt19937_64 rng(1);
  const auto g = gate(random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), constant_gate(4, 0.0));
  for (double v : g.data()) EXPECT_EQ(v, 0.5);
}

TEST(Gate, SaturatesWithoutOverflow) {
  std::mt19937_64 rng(2);
  const auto a = random_tensor({2, 4}, rng), b = random_tensor({2, 4}, rng);
  const auto hi = gate(a, b, constant_gate(4, 800.0));
  const auto lo = gate(a, b, constant_gate(4, -800.0));
  for (double v : hi.data()) EXPECT_EQ(v, 1.0);
  for (double v : lo.data()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1e-300);
  }
}

TEST(Gate, OneHotThroughScaledIdentity) {
  const std::size_t d = 4;
  const double s = 1.7;
  const auto a = Tensor::from({1, d}, {0.0, 0.0, 1.0, 0.0});
  const auto b = Tensor::from({1, d}, {3.0, -2.0, 5.0, 1.0});
  const GateParams p{identity(d, s), Tensor::zeros({d, d}), Tensor::zeros({d})};
  const auto g = gate(a, b, p);
  const double hot = 1.0 / (1.0 + std::exp(-s));
  EXPECT_NEAR(g.at(0, 2), hot, 1e-15);
  for (std::size_t j : {0u, 1u, 3u}) EXPECT_EQ(g.at(0, j), 0.5);
}

TEST(Gate, ShapeMismatchThrows) {
  EXPECT_THROW(gate(Tensor::zeros({2, 4}), Tensor::zeros({3, 4}), constant_gate(4, 0.0)), std::invalid_argument);
}

TEST(GatedMix, ForcedGates) {
  std::mt19937_64 rng(3);
  const auto retained = random_tensor({3, 4}, rng), incoming = random_tensor({3, 4}, rng);
  expect_equal(gated_mix(Tensor::full({3, 4}, 1.0), retained, incoming), retained);
  expect_equal(gated_mix(Tensor::full({3, 4}, 0.0), retained, incoming), incoming);
}

struct MemoryFixture {
  ModelConfig config = tiny_config();
  ChimeModel model{config};
  MemoryParams params = model.memory();
  BlockContext ctx = model.block_context();
};

TEST(UpdateContext, MidpointWithZeroGateParams) {
  MemoryFixture fx;
  const auto d = fx.config.d_model;
  fx.params.context_gate = constant_gate(d, 0.0);
  const auto out = update_context(Tensor::zeros({5, d}), Tensor::full({5, d}, 2.0), {}, fx.params, fx.ctx);
  for (double v : out.memory.data()) EXPECT_EQ(v, 1.0);
}

TEST(UpdateContext, ForcedGates) {
  MemoryFixture fx;
  const auto d = fx.config.d_model;
  std::mt19937_64 rng(4);
  const auto prev = random_tensor({5, d}, rng), hidden = random_tensor({5, d}, rng);
  fx.params.context_gate = constant_gate(d, 800.0);
  expect_equal(update_context(prev, hidden, {}, fx.params, fx.ctx).memory, prev);
  fx.params.context_gate = constant_gate(d, -800.0);
  expect_equal(update_context(prev, hidden, {}, fx.params, fx.ctx).memory, hidden);
}

TEST(UpdateAnswer, ForcedGatesMultiplyTheNewStates) {
  MemoryFixture fx;
  const auto d = fx.config.d_model;
  std::mt19937_64 rng(5);
  const auto prev = random_tensor({3, d}, rng), hidden = random_tensor({3, d}, rng);
  const auto keys = random_tensor({5, d}, rng);
  fx.params.answer_gate = constant_gate(d, 800.0);
  expect_equal(update_answer(prev, hidden, keys, {}, fx.params, fx.ctx).memory, hidden);
  fx.params.answer_gate = constant_gate(d, -800.0);
  expect_equal(update_answer(prev, hidden, keys, {}, fx.params, fx.ctx).memory, prev);
}

TEST(Updates, ShapeMismatchThrows) {
  MemoryFixture fx;
  const auto d = fx.config.d_model;
  EXPECT_THROW(update_context(Tensor::zeros({5, d}), Tensor::zeros({4, d}), {}, fx.params, fx.ctx),
               std::invalid_argument);
  EXPECT_THROW(update_answer(Tensor::zeros({3, d}), Tensor::zeros({2, d}), Tensor::zeros({5, d}), {}, fx.params,
                             fx.ctx),
               std::invalid_argument);
}

void check_update(const Tensor& out, const Tensor& x, const Tensor& y, const Tensor& g, bool open_gates) {
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double lo = std::min(x.data()[i], y.data()[i]), hi = std::max(x.data()[i], y.data()[i]);
    ASSERT_GE(out.data()[i], lo - 1e-12);
    ASSERT_LE(out.data()[i], hi + 1e-12);
    ASSERT_GE(g.data()[i], 0.0);
    ASSERT_LE(g.data()[i], 1.0);
    if (open_gates) {
      ASSERT_GT(g.data()[i], 0.0);
      ASSERT_LT(g.data()[i], 1.0);
    }
  }
}

// Odd trials draw inputs up to scale 30, where the sigmoid can round to 0 or
// 1 exactly; open gates are asserted only for unit-scale inputs.
TEST(Updates, StayInsideTheirSources) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = tiny_config(Variant::full, static_cast<std::uint64_t>(trial));
    c.init_std = 0.5;
    const ChimeModel model(c);
    const auto ctx = model.block_context();
    const auto d = c.d_model;
    const bool unit = trial % 2 == 0;
    const double scale = unit ? 1.0 : 0.1 + static_cast<double>(rng() % 30);
    const auto m_prev = random_tensor({5, d}, rng, scale), h_c = random_tensor({5, d}, rng, scale);
    const auto a_prev = random_tensor({3, d}, rng, scale), h_a = random_tensor({3, d}, rng, scale);
    const auto cu = update_context(m_prev, h_c, {}, model.memory(), ctx);
    const auto au = update_answer(a_prev, h_a, cu.memory, {}, model.memory(), ctx);
    check_update(cu.memory, m_prev, h_c, cu.gate, unit);
    check_update(au.memory, a_prev, h_a, au.gate, unit);
  }
}

TEST(CrossAttend, OutputHasQueryShape) {
  MemoryFixture fx;
  std::mt19937_64 rng(7);
  for (std::size_t q : {1u, 3u, 6u})
    for (std::size_t k : {1u, 2u, 9u}) {
      const auto out = cross_attend(random_tensor({q, fx.config.d_model}, rng),
                                    random_tensor({k, fx.config.d_model}, rng), {}, fx.params.answer_block, fx.ctx);
      EXPECT_EQ(out.shape(), (Shape{q, fx.config.d_model}));
    }
}

TEST(CrossAttend, SingleKeyGivesSameRowToEveryQuery) {
  MemoryFixture fx;
  std::mt19937_64 rng(8);
  const auto out = multi_head_attention(random_tensor({4, fx.config.d_model}, rng),
                                        random_tensor({1, fx.config.d_model}, rng),
                                        fx.params.answer_block.attention, nullptr);
  for (std::size_t q = 1; q < 4; ++q)
    for (std::size_t j = 0; j < fx.config.d_model; ++j) EXPECT_NEAR(out.at(q, j), out.at(0, j), 1e-14);
}

TEST(CrossAttend, ZeroedQueryProjectionAveragesValues) {
  const std::size_t d = 4;
  std::mt19937_64 rng(9);
  AttentionParams p;
  p.heads = 2;
  p.wq = Tensor::zeros({d, d});
  p.bq = Tensor::zeros({d});
  p.wk = random_tensor({d, d}, rng);
  p.bk = random_tensor({d}, rng);
  p.wv = identity(d);
  p.bv = Tensor::zeros({d});
  p.wo = identity(d);
  p.bo = Tensor::zeros({d});
  const auto kv = Tensor::from({3, d}, {1, 2, 3, 4, 5, 6, 7, 8, 0, -1, 2, 9});
  const auto out = multi_head_attention(random_tensor({2, d}, rng), kv, p, nullptr);
  const std::vector<double> mean{2.0, 7.0 / 3.0, 4.0, 7.0};
  for (std::size_t q = 0; q < 2; ++q)
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(out.at(q, j), mean[j], 1e-14);
}

std::vector<InstanceTensors> group_for(const ModelConfig& c, std::mt19937_64& rng, std::size_t passages) {
  const auto r = random_record(rng, c, passages);
  return assemble_group(r, r.answers[0], c.caps);
}

TEST(ReadPassages, SinglePassageIsTheEncoderOutput) {
  for (auto variant : {Variant::full, Variant::chime_c}) {
    const auto c = tiny_config(variant);
    const ChimeModel model(c);
    std::mt19937_64 rng(10);
    const auto group = group_for(c, rng, 1);
    const auto fwd = model.forward(group);
    expect_equal(fwd.read.decoder_input, fwd.encoded[0].answer);
    if (variant == Variant::full) expect_equal(fwd.read.state.context, fwd.encoded[0].context);
    EXPECT_EQ(fwd.read.state.passages_read, 1u);
  }
}

TEST(ReadPassages, FullRetentionKeepsFirstContext) {
  const auto c = tiny_config();
  const ChimeModel model(c);
  auto params = model.memory();
  params.context_gate = constant_gate(c.d_model, 800.0);
  params.answer_gate = constant_gate(c.d_model, 800.0);
  std::mt19937_64 rng(11);
  const auto group = group_for(c, rng, 2);
  const auto fwd = model.forward(group);
  const auto read = read_passages(fwd.encoded, group, params, c.variant, model.block_context());
  expect_equal(read.state.context, fwd.encoded[0].context);
  expect_equal(read.decoder_input, fwd.encoded[1].answer);
}

TEST(ReadPassages, TraceHasOneStepPerPassage) {
  for (auto variant : {Variant::full, Variant::chime_c, Variant::chime_a}) {
    const auto c = tiny_config(variant);
    const ChimeModel model(c);
    std::mt19937_64 rng(12);
    const auto group = group_for(c, rng, 3);
    const auto fwd = model.forward(group);
    ASSERT_EQ(fwd.read.trace.size(), 3u) << to_string(variant);
    EXPECT_EQ(fwd.read.state.passages_read, 3u);
    expect_equal(fwd.read.trace.back().answer_memory, fwd.read.decoder_input);
    EXPECT_EQ(fwd.read.trace[0].mean_context_gate, -1.0);
    for (std::size_t k = 1; k < 3; ++k) {
      const auto& s = fwd.read.trace[k];
      EXPECT_EQ(s.mean_context_gate >= 0.0, variant != Variant::chime_c);
      EXPECT_EQ(s.mean_answer_gate >= 0.0, variant != Variant::chime_a);
    }
  }
}

TEST(ReadPassages, Errors) {
  const auto c = tiny_config();
  const ChimeModel model(c);
  std::mt19937_64 rng(13);
  auto group = group_for(c, rng, 2);
  const auto fwd = model.forward(group);
  EXPECT_THROW(read_passages({}, {}, model.memory(), c.variant, model.block_context()), std::invalid_argument);
  auto other = c;
  other.caps.answer += 1;
  group[1] = assemble_triple(std::vector<TokenId>{5}, std::vector<TokenId>{6}, std::vector<TokenId>{7}, other.caps);
  EXPECT_THROW(read_passages(fwd.encoded, group, model.memory(), c.variant, model.block_context()),
               std::invalid_argument);
}

TEST(ReadPassages, AnswerMemoryIsCausal) {
  std::mt19937_64 rng(14);
  for (auto variant : {Variant::full, Variant::chime_c, Variant::chime_a}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto c = tiny_config(variant, static_cast<std::uint64_t>(trial));
      c.caps.answer = 3;
      const ChimeModel model(c);
      auto r = random_record(rng, c, 3);
      r.answers[0].assign(3, 9);
      const auto base = model.forward(assemble_group(r, r.answers[0], c.caps)).read.decoder_input;
      for (std::size_t t = 0; t < 3; ++t) {
        auto changed = r.answers[0];
        changed[t] = 10;
        const auto out = model.forward(assemble_group(r, changed, c.caps)).read.decoder_input;
        // answer token t sits at part-2 row t + 1.
        for (std::size_t row = 0; row <= t; ++row)
          for (std::size_t j = 0; j < c.d_model; ++j) ASSERT_NEAR(out.at(row, j), base.at(row, j), 1e-10);
      }
    }
  }
}

TEST(ReadPassages, GradientReachesTheFirstPassage) {
  for (auto variant : {Variant::full, Variant::chime_c, Variant::chime_a}) {
    const auto c = tiny_config(variant);
    ChimeModel model(c);
    std::mt19937_64 rng(15);
    auto r = random_record(rng, c, 3);
    const TokenId marker = static_cast<TokenId>(c.vocab_size - 1);
    for (auto& p : r.passages)
      for (auto& t : p)
        if (t == marker) t = marker - 1;
    for (auto& t : r.question)
      if (t == marker) t = marker - 1;
    for (auto& t : r.answers[0])
      if (t == marker) t = marker - 1;
    r.passages[0][0] = marker;
    model.zero_grad();
    model.loss(assemble_group(r, r.answers[0], c.caps)).backward();
    const auto grad = model.encoder().token_embedding.grad();
    double norm = 0.0;
    for (std::size_t j = 0; j < c.d_model; ++j) norm += std::abs(grad[static_cast<std::size_t>(marker) * c.d_model + j]);
    EXPECT_GT(norm, 1e-10) << to_string(variant);
  }
}

std::size_t count_prefix(const ChimeModel& m, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& p : m.parameters())
    if (p.name.rfind(prefix, 0) == 0) n += p.tensor.numel();
  return n;
}

TEST(Variants, RemovedComponentsHaveNoParameters) {
  const ChimeModel full(tiny_config(Variant::full));
  const ChimeModel no_context(tiny_config(Variant::chime_c));
  const ChimeModel no_answer(tiny_config(Variant::chime_a));
  const auto d = full.config().d_model;
  EXPECT_EQ(count_prefix(no_context, "memory.context"), 0u);
  EXPECT_EQ(count_prefix(no_answer, "memory.answer_gate"), 0u);
  EXPECT_EQ(count_prefix(full, "memory.context_gate"), 2 * d * d + d);
  EXPECT_EQ(full.parameter_count() - no_answer.parameter_count(), 2 * d * d + d);
  EXPECT_EQ(full.parameter_count() - no_context.parameter_count(), count_prefix(full, "memory.context"));
  EXPECT_FALSE(no_context.memory().context_block.has_value());
  EXPECT_FALSE(no_answer.memory().answer_gate.has_value());
}

}  // namespace
}  // namespace chime
