#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "chime/decoder.hpp"
#include "chime/instance.hpp"
#include "chime/model.hpp"
#include "chime/ops.hpp"
#include "chime/synthetic.hpp"
#include "chime/trainer.hpp"

namespace {

chime::Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = n(rng);
  return chime::Tensor::from({rows, cols}, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_matrix(n, n, rng);
  const auto b = random_matrix(n, n, rng);
  chime::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(chime::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

struct Fixture {
  chime::ModelConfig config;
  chime::SyntheticCorpus corpus;

  explicit Fixture(std::size_t d) {
    chime::SyntheticConfig sc;
    sc.seed = 3;
    sc.questions = 16;
    corpus = chime::gen_synthetic(sc);
    config.d_model = d;
    config.ff_inner = 4 * d;
    config.memory_ff_inner = 4 * d;
    config.vocab_size = corpus.vocab.size();
    config.caps = sc.caps();
    config.passages = sc.passages;
    config.precision = chime::Precision::f64;
  }
};

void BM_Forward(benchmark::State& state) {
  Fixture fx(static_cast<std::size_t>(state.range(0)));
  const chime::ChimeModel model(fx.config);
  const auto& r = fx.corpus.records.front();
  const auto group = chime::assemble_group(r, r.answers[chime::select_best_answer(r.votes)], fx.config.caps);
  chime::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(group).logits);
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  Fixture fx(static_cast<std::size_t>(state.range(0)));
  fx.config.total_steps = 1 << 30;
  chime::Trainer trainer(fx.config, fx.corpus.records);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BeamDecode(benchmark::State& state) {
  Fixture fx(32);
  const chime::ChimeModel model(fx.config);
  chime::GenerationConfig g;
  g.max_length = fx.config.caps.answer;
  g.beam_width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(chime::beam_decode(model, fx.corpus.records.front(), g));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
