#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "chime/baselines.hpp"
#include "chime/config.hpp"
#include "chime/decoder.hpp"
#include "chime/errors.hpp"
#include "chime/instance.hpp"
#include "chime/metrics.hpp"
#include "chime/model.hpp"
#include "chime/parallel.hpp"
#include "chime/records.hpp"
#include "chime/synthetic.hpp"
#include "chime/trainer.hpp"
#include "chime/vocab.hpp"

namespace chime::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class MissingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw MissingFileError(std::string(what) + " not found: " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out;
}

int report(std::ostream& err, ExitCode code, const char* kind, const std::string& message) {
  err << "error: kind=" << kind << " exit=" << static_cast<int>(code) << " message=\"" << escape(message) << "\"\n";
  return code;
}

std::vector<std::string> decode_tokens(const Vocab& vocab, std::span<const TokenId> ids) {
  std::vector<std::string> out;
  for (auto id : ids)
    if (id != kPad) out.push_back(vocab.token(id));
  return out;
}

std::string decode_text(const Vocab& vocab, std::span<const TokenId> ids) {
  const auto tokens = decode_tokens(vocab, ids);
  return join_tokens(tokens);
}

// Synthetic distractors are wrong by construction, so only the top-voted
// answer is a reference.
std::vector<GoldAnswers> best_answer_gold(std::span<const QARecord> records, const Vocab& vocab) {
  std::vector<GoldAnswers> gold;
  for (const auto& r : records)
    gold.push_back({r.id, {decode_text(vocab, r.answers[select_best_answer(r.votes)])}});
  return gold;
}

Caps caps_from_records(std::span<const QARecord> records) {
  Caps caps{1, 1, 1};
  for (const auto& r : records) {
    caps.question = std::max(caps.question, r.question.size());
    for (const auto& p : r.passages) caps.passage = std::max(caps.passage, p.size());
    for (const auto& a : r.answers) caps.answer = std::max(caps.answer, a.size());
  }
  return caps;
}

QARecord fit_to_caps(QARecord record, const Caps& caps) {
  if (record.question.size() > caps.question) record.question.resize(caps.question);
  for (auto& p : record.passages)
    if (p.size() > caps.passage) p.resize(caps.passage);
  return record;
}

Vocab load_vocab(const fs::path& path) {
  require_file(path, "vocab");
  return Vocab::load(path);
}

std::vector<QARecord> load_records(const fs::path& path) {
  require_file(path, "data");
  auto records = read_records(path);
  if (records.empty()) throw ParseError(path.string() + " holds no records", 0);
  return records;
}

// ---------------------------------------------------------------- synth-data

struct SynthOptions {
  SyntheticConfig config;
  std::size_t test_n = 0;
  std::string task = "mixed";
  fs::path out;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  auto config = o.config;
  config.task = synthetic_task_from_string(o.task);
  const auto train_n = config.questions;
  config.questions = train_n + o.test_n;
  const auto corpus = gen_synthetic(config);

  fs::create_directories(o.out);
  const std::span<const QARecord> all(corpus.records);
  const auto train = all.first(train_n);
  const auto test = all.subspan(train_n);
  write_records(o.out / "records.jsonl", train);
  write_gold(o.out / "gold.jsonl", best_answer_gold(train, corpus.vocab));
  if (!test.empty()) {
    write_records(o.out / "test.jsonl", test);
    write_gold(o.out / "test_gold.jsonl", best_answer_gold(test, corpus.vocab));
  }
  corpus.vocab.save(o.out / "vocab.txt");
  const auto caps = config.caps();
  out << json{{"train", train.size()},
              {"test", test.size()},
              {"vocab_size", corpus.vocab.size()},
              {"passages", config.passages},
              {"caps", {caps.question, caps.passage, caps.answer}},
              {"dir", o.out.string()}}
             .dump()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
  fs::path input;
  fs::path out;
  FilterConfig filter;
  std::size_t vocab_size = 5000;
};

int cmd_prepare(const PrepareOptions& o, std::ostream& out) {
  require_file(o.input, "input");
  const auto raw = read_raw_records(o.input);
  std::vector<TextRecord> kept;
  std::map<std::string, std::size_t> rejected;
  for (const auto& r : raw) {
    auto outcome = filter_record(r, o.filter);
    if (outcome.accepted()) {
      kept.push_back(std::move(*outcome.record));
    } else {
      ++rejected[outcome.reason];
    }
  }
  if (kept.empty()) throw ParseError("no record of " + o.input.string() + " survived filtering", 0);

  std::vector<std::string> corpus;
  for (const auto& r : kept) {
    corpus.push_back(join_tokens(r.question));
    for (const auto& p : r.passages) corpus.push_back(join_tokens(p));
    for (const auto& a : r.answers) corpus.push_back(join_tokens(a));
  }
  const auto vocab = build_vocab(corpus, o.vocab_size);
  std::vector<QARecord> encoded;
  std::vector<GoldAnswers> gold;
  for (const auto& r : kept) {
    encoded.push_back(encode_record(r, vocab));
    GoldAnswers g{r.id, {}};
    for (const auto& a : r.answers) g.texts.push_back(join_tokens(a));
    gold.push_back(std::move(g));
  }
  fs::create_directories(o.out);
  write_records(o.out / "records.jsonl", encoded);
  write_gold(o.out / "gold.jsonl", gold);
  vocab.save(o.out / "vocab.txt");
  out << json{{"read", raw.size()}, {"kept", kept.size()}, {"rejected", rejected}, {"vocab_size", vocab.size()}}.dump()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  fs::path data;
  fs::path vocab;
  fs::path out;
  fs::path log;
  fs::path model_config;
  fs::path resume;
  std::string variant = "full";
  std::size_t d_model = 64;
  std::size_t blocks = 2;
  std::size_t heads = 4;
  std::size_t ff_inner = 256;
  std::size_t epochs = 3;
  std::int64_t steps = 0;
  double lr = 1e-5;
  double warmup = 0.2;
  double weight_decay = 0.01;
  double clip = 1.0;
  std::size_t grad_accum = 1;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  std::string precision = "f32";
  bool per_passage_loss = false;
  std::size_t question_cap = 0;
  std::size_t passage_cap = 0;
  std::size_t answer_cap = 0;
  std::size_t log_every = 100;
};

ModelConfig build_model_config(const TrainOptions& o, const CLI::App& cmd, std::span<const QARecord> records,
                               const Vocab& vocab) {
  ModelConfig c;
  const bool from_file = !o.model_config.empty();
  if (from_file) {
    require_file(o.model_config, "model config");
    c = ModelConfig::load(o.model_config);
  } else {
    c.caps = caps_from_records(records);
  }
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (given("--variant")) c.variant = variant_from_string(o.variant);
  if (given("--d-model")) c.d_model = o.d_model;
  if (given("--blocks")) c.blocks = o.blocks;
  if (given("--heads")) c.heads = c.memory_heads = o.heads;
  if (given("--ff-inner")) c.ff_inner = c.memory_ff_inner = o.ff_inner;
  if (given("--epochs")) c.epochs = o.epochs;
  if (given("--steps")) c.total_steps = o.steps;
  if (given("--lr")) c.peak_lr = o.lr;
  if (given("--warmup")) c.warmup_fraction = o.warmup;
  if (given("--weight-decay")) c.adamw.weight_decay = o.weight_decay;
  if (given("--clip")) c.clip_norm = o.clip;
  if (given("--grad-accum")) c.grad_accum = o.grad_accum;
  if (given("--dropout")) c.dropout = o.dropout;
  if (given("--seed")) c.seed = o.seed;
  if (given("--precision")) c.precision = precision_from_string(o.precision);
  if (given("--per-passage-loss")) c.per_passage_loss = o.per_passage_loss;
  if (given("--question-cap")) c.caps.question = o.question_cap;
  if (given("--passage-cap")) c.caps.passage = o.passage_cap;
  if (given("--answer-cap")) c.caps.answer = o.answer_cap;
  c.vocab_size = vocab.size();
  c.passages = records.front().passages.size();
  c.validate();
  return c;
}

int cmd_train(const TrainOptions& o, const CLI::App& cmd, std::ostream& out) {
  const auto vocab = load_vocab(o.vocab);
  auto records = load_records(o.data);

  std::optional<Trainer> trainer;
  if (!o.resume.empty()) {
    require_file(o.resume, "checkpoint");
    auto cp = load_checkpoint(o.resume);
    if (cp.config.vocab_size != vocab.size()) {
      throw IncompatibleError("checkpoint vocabulary " + std::to_string(cp.config.vocab_size) +
                              " != vocab file size " + std::to_string(vocab.size()));
    }
    for (auto& r : records) r = fit_to_caps(std::move(r), cp.config.caps);
    trainer.emplace(cp, std::move(records));
  } else {
    const auto config = build_model_config(o, cmd, records, vocab);
    for (auto& r : records) r = fit_to_caps(std::move(r), config.caps);
    trainer.emplace(config, std::move(records));
  }

  std::ofstream log;
  if (!o.log.empty()) {
    const bool append = !o.resume.empty() && fs::exists(o.log);
    ensure_parent(o.log);
    log.open(o.log, append ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + o.log.string());
    if (!append) write_log_header(log);
  }
  spdlog::info("training {} parameters for {} steps ({} variant)", trainer->model().parameter_count(),
               trainer->total_steps(), to_string(trainer->model().config().variant));
  TrainLogEntry last;
  trainer->run(-1, [&](const TrainLogEntry& e) {
    last = e;
    if (log.is_open()) write_log_row(log, e);
    if (o.log_every > 0 && (e.step % static_cast<std::int64_t>(o.log_every) == 0 || e.step == trainer->total_steps()))
      spdlog::info("step {} lr {:.3g} loss {:.5f} grad_norm {:.4f}", e.step, e.lr, e.loss, e.grad_norm);
  });

  ensure_parent(o.out);
  save_checkpoint(o.out, trainer->checkpoint());
  trainer->model().config().save(fs::path(o.out).concat(".config.json"));
  out << json{{"steps", trainer->step()},
              {"final_loss", last.loss},
              {"variant", to_string(trainer->model().config().variant)},
              {"parameters", trainer->model().parameter_count()},
              {"checkpoint", o.out.string()}}
             .dump()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  fs::path checkpoint;
  fs::path data;
  fs::path vocab;
  fs::path out;
  fs::path trace;
  bool greedy = false;
  std::size_t beam = 3;
  std::size_t max_length = 0;
  double length_penalty = 1.0;
  std::size_t workers = 1;
};

struct LoadedModel {
  ChimeModel model;
  Vocab vocab;
};

LoadedModel load_model(const fs::path& checkpoint, const fs::path& vocab_path) {
  require_file(checkpoint, "checkpoint");
  auto vocab = load_vocab(vocab_path);
  auto cp = load_checkpoint(checkpoint);
  if (cp.config.vocab_size != vocab.size()) {
    throw IncompatibleError("checkpoint vocabulary " + std::to_string(cp.config.vocab_size) + " != vocab file size " +
                            std::to_string(vocab.size()));
  }
  return {model_from_checkpoint(cp), std::move(vocab)};
}

json trace_lines(const ChimeModel& model, const QARecord& record, const std::vector<TokenId>& answer,
                 const GenerationConfig& greedy, const Vocab& vocab) {
  std::vector<InstanceTensors> instances;
  const auto& caps = model.config().caps;
  std::vector<TokenId> prefix(answer.begin(), answer.begin() + static_cast<std::ptrdiff_t>(
                                                                   std::min(answer.size(), caps.answer)));
  for (const auto& p : record.passages) instances.push_back(assemble_prefix(record.question, p, prefix, caps));
  std::vector<MemoryTraceStep> steps;
  {
    NoGradGuard no_grad;
    PrecisionGuard precision(model.config().precision);
    steps = model.forward(instances).read.trace;
  }
  json lines = json::array();
  for (std::size_t k = 1; k <= record.passages.size(); ++k) {
    QARecord partial = record;
    partial.passages.resize(k);
    const auto tokens = greedy_decode(model, partial, greedy);
    json line{{"id", record.id}, {"passages_read", k}, {"text", decode_text(vocab, tokens)}};
    const auto& s = steps[k - 1];
    line["mean_context_gate"] = s.mean_context_gate < 0 ? json(nullptr) : json(s.mean_context_gate);
    line["mean_answer_gate"] = s.mean_answer_gate < 0 ? json(nullptr) : json(s.mean_answer_gate);
    lines.push_back(std::move(line));
  }
  return lines;
}

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  auto loaded = load_model(o.checkpoint, o.vocab);
  const auto& model = loaded.model;
  const auto& caps = model.config().caps;
  auto records = load_records(o.data);
  for (auto& r : records) r = fit_to_caps(std::move(r), caps);

  GenerationConfig gen;
  gen.max_length = o.max_length == 0 ? caps.answer : o.max_length;
  if (gen.max_length > caps.answer) {
    throw std::invalid_argument("--max-length " + std::to_string(gen.max_length) + " exceeds the model answer cap " +
                                std::to_string(caps.answer));
  }
  gen.beam_width = o.greedy ? 1 : o.beam;
  gen.length_penalty = o.length_penalty;
  gen.validate();
  GenerationConfig greedy = gen;
  greedy.beam_width = 1;

  std::vector<Prediction> predictions(records.size());
  std::vector<json> traces(o.trace.empty() ? 0 : records.size());
  parallel_for(records.size(), o.workers, [&](std::size_t i) {
    const auto& r = records[i];
    std::vector<TokenId> tokens;
    std::vector<double> scores;
    if (o.greedy) {
      tokens = greedy_decode(model, r, gen);
    } else {
      const auto hyps = beam_decode(model, r, gen);
      if (!hyps.empty()) tokens = hyps.front().tokens;
      for (const auto& h : hyps) scores.push_back(h.score);
    }
    predictions[i] = {r.id, decode_text(loaded.vocab, tokens), std::move(scores)};
    if (!o.trace.empty()) traces[i] = trace_lines(model, r, tokens, greedy, loaded.vocab);
  });

  ensure_parent(o.out);
  write_predictions(o.out, predictions);
  if (!o.trace.empty()) {
    auto trace = open_out(o.trace);
    for (const auto& lines : traces)
      for (const auto& line : lines) trace << line.dump() << '\n';
  }
  out << json{{"predictions", predictions.size()}, {"decoder", o.greedy ? "greedy" : "beam"},
              {"beam_width", gen.beam_width}, {"out", o.out.string()}}
             .dump()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  fs::path predictions;
  fs::path gold;
  fs::path csv;
  std::string name = "model";
  std::size_t workers = 1;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  require_file(o.predictions, "predictions");
  require_file(o.gold, "gold");
  const auto predictions = read_predictions(o.predictions);
  if (predictions.empty()) throw ParseError("predictions file " + o.predictions.string() + " is empty", 0);
  const auto report = evaluate(predictions, read_gold(o.gold), o.workers);
  write_report_table(out, report, o.name);
  if (!o.csv.empty()) {
    auto csv = open_out(o.csv);
    write_report_csv(csv, report, o.name);
  }
  return kOk;
}

// ---------------------------------------------------------------- baseline

struct BaselineOptions {
  std::string kind;
  fs::path data;
  fs::path vocab;
  fs::path out;
  fs::path checkpoint;
  std::uint64_t seed = 0;
};

int cmd_baseline(const BaselineOptions& o, std::ostream& out) {
  const auto records = load_records(o.data);
  std::optional<LoadedModel> loaded;
  Vocab vocab;
  if (o.kind == "retrieval") {
    if (o.checkpoint.empty()) throw std::invalid_argument("baseline retrieval needs --checkpoint for its embedder");
    loaded.emplace(load_model(o.checkpoint, o.vocab));
    vocab = loaded->vocab;
  } else {
    vocab = load_vocab(o.vocab);
  }
  std::mt19937_64 rng(o.seed);
  std::optional<Embedder> embedder;
  if (loaded) embedder = mean_embedding_embedder(loaded->model, loaded->vocab);

  std::vector<Prediction> predictions;
  for (const auto& r : records) {
    std::vector<std::string> reviews;
    for (const auto& p : r.passages) reviews.push_back(decode_text(vocab, p));
    const auto text = embedder ? retrieval_sentence_baseline(decode_text(vocab, r.question), reviews, *embedder)
                               : random_sentence_baseline(reviews, rng);
    predictions.push_back({r.id, text, {}});
  }
  ensure_parent(o.out);
  write_predictions(o.out, predictions);
  out << json{{"predictions", predictions.size()}, {"baseline", o.kind}, {"out", o.out.string()}}.dump() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (!spdlog::get("chime")) spdlog::set_default_logger(spdlog::stderr_color_mt("chime"));
  CLI::App app{"chime: multi-passage answer generation with hierarchical memory"};
  app.name("chime");
  app.set_config("--config", "", "TOML/INI file supplying any flag; the command line wins");
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a seeded synthetic corpus");
  synth_cmd->add_option("--seed", synth.config.seed, "RNG seed")->capture_default_str();
  synth_cmd->add_option("--n", synth.config.questions, "Training questions")->capture_default_str();
  synth_cmd->add_option("--test-n", synth.test_n, "Held-out questions (test.jsonl)")->capture_default_str();
  synth_cmd->add_option("--passages", synth.config.passages, "Passages per question")->capture_default_str();
  synth_cmd->add_option("--vocab-size", synth.config.vocab_size, "Vocabulary size")->capture_default_str();
  synth_cmd->add_option("--passage-length", synth.config.passage_length, "Tokens per passage")->capture_default_str();
  synth_cmd->add_option("--task", synth.task, "key | majority | mixed")
      ->check(CLI::IsMember({"key", "majority", "mixed"}))
      ->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  PrepareOptions prep;
  auto* prep_cmd = app.add_subcommand("prepare", "Filter and encode AmazonQA-style JSON lines");
  prep_cmd->add_option("--input", prep.input, "Raw JSON-lines file")->required();
  prep_cmd->add_option("--out", prep.out, "Output directory")->required();
  prep_cmd->add_option("--passages", prep.filter.passages, "Required passages per question")->capture_default_str();
  prep_cmd->add_option("--question-cap", prep.filter.caps.question, "Question token cap")->capture_default_str();
  prep_cmd->add_option("--passage-cap", prep.filter.caps.passage, "Passage token cap")->capture_default_str();
  prep_cmd->add_option("--answer-cap", prep.filter.caps.answer, "Answer token cap")->capture_default_str();
  prep_cmd->add_option("--vocab-size", prep.vocab_size, "Vocabulary size")->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--data", train.data, "Encoded records (records.jsonl)")->required();
  train_cmd->add_option("--vocab", train.vocab, "Vocabulary file")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train.log, "Metrics CSV (step,lr,loss,grad_norm)");
  train_cmd->add_option("--model-config", train.model_config, "JSON model config; flags override it");
  train_cmd->add_option("--resume", train.resume, "Continue from this checkpoint");
  train_cmd->add_option("--variant", train.variant, "full | chime_c | chime_a")
      ->check(CLI::IsMember({"full", "chime_c", "chime_a"}))
      ->capture_default_str();
  train_cmd->add_option("--d-model", train.d_model, "Hidden size")->capture_default_str();
  train_cmd->add_option("--blocks", train.blocks, "Encoder blocks")->capture_default_str();
  train_cmd->add_option("--heads", train.heads, "Attention heads")->capture_default_str();
  train_cmd->add_option("--ff-inner", train.ff_inner, "Feed-forward inner size")->capture_default_str();
  train_cmd->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--steps", train.steps, "Total optimizer steps (0: from epochs)")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "Peak learning rate")->capture_default_str();
  train_cmd->add_option("--warmup", train.warmup, "Warmup fraction")->capture_default_str();
  train_cmd->add_option("--weight-decay", train.weight_decay, "AdamW weight decay")->capture_default_str();
  train_cmd->add_option("--clip", train.clip, "Global gradient-norm clip")->capture_default_str();
  train_cmd->add_option("--grad-accum", train.grad_accum, "Question groups per step")->capture_default_str();
  train_cmd->add_option("--dropout", train.dropout, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Seed for init, ordering and dropout")->capture_default_str();
  train_cmd->add_option("--precision", train.precision, "f32 | f64")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  train_cmd->add_flag("--per-passage-loss", train.per_passage_loss, "Average the loss over every passage step");
  train_cmd->add_option("--question-cap", train.question_cap, "Question cap (default: from data)");
  train_cmd->add_option("--passage-cap", train.passage_cap, "Passage cap (default: from data)");
  train_cmd->add_option("--answer-cap", train.answer_cap, "Answer cap (default: from data)");
  train_cmd->add_option("--log-every", train.log_every, "Progress line interval")->capture_default_str();

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "Decode answers for every record");
  gen_cmd->add_option("--checkpoint", gen.checkpoint, "Checkpoint path")->required();
  gen_cmd->add_option("--data", gen.data, "Encoded records")->required();
  gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary file")->required();
  gen_cmd->add_option("--out", gen.out, "Predictions JSON lines")->required();
  auto* greedy_flag = gen_cmd->add_flag("--greedy", gen.greedy, "Greedy decoding");
  gen_cmd->add_option("--beam", gen.beam, "Beam width")->capture_default_str()->excludes(greedy_flag);
  gen_cmd->add_option("--max-length", gen.max_length, "Answer tokens (default: model answer cap)");
  gen_cmd->add_option("--length-penalty", gen.length_penalty, "Length-normalization exponent")->capture_default_str();
  gen_cmd->add_option("--trace", gen.trace, "Per-passage intermediate answers (JSON lines)");
  gen_cmd->add_option("--workers", gen.workers, "Worker threads")->capture_default_str();

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold answers");
  eval_cmd->add_option("--predictions", eval.predictions, "Predictions JSON lines")->required();
  eval_cmd->add_option("--gold", eval.gold, "Gold JSON lines")->required();
  eval_cmd->add_option("--csv", eval.csv, "Write the report as CSV");
  eval_cmd->add_option("--name", eval.name, "Model name in the report")->capture_default_str();
  eval_cmd->add_option("--workers", eval.workers, "Worker threads")->capture_default_str();

  BaselineOptions base;
  auto* base_cmd = app.add_subcommand("baseline", "Heuristic sentence baselines");
  base_cmd->add_option("kind", base.kind, "random | retrieval")
      ->required()
      ->check(CLI::IsMember({"random", "retrieval"}));
  base_cmd->add_option("--data", base.data, "Encoded records")->required();
  base_cmd->add_option("--vocab", base.vocab, "Vocabulary file")->required();
  base_cmd->add_option("--out", base.out, "Predictions JSON lines")->required();
  base_cmd->add_option("--checkpoint", base.checkpoint, "Model whose token embeddings drive retrieval");
  base_cmd->add_option("--seed", base.seed, "RNG seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return kOk;
  } catch (const CLI::FileError& e) {
    return report(err, kMissingFile, "missing_file", e.what());
  } catch (const CLI::ParseError& e) {
    return report(err, kUsage, "usage", e.what());
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*prep_cmd) return cmd_prepare(prep, out);
    if (*train_cmd) return cmd_train(train, *train_cmd, out);
    if (*gen_cmd) return cmd_generate(gen, out);
    if (*eval_cmd) return cmd_evaluate(eval, out);
    if (*base_cmd) return cmd_baseline(base, out);
    return report(err, kUsage, "usage", "no subcommand");
  } catch (const MissingFileError& e) {
    return report(err, kMissingFile, "missing_file", e.what());
  } catch (const ParseError& e) {
    return report(err, kBadInput, "bad_input", e.what());
  } catch (const IncompatibleError& e) {
    return report(err, kIncompatible, "incompatible", e.what());
  } catch (const NumericError& e) {
    return report(err, kNumeric, "numeric", e.what());
  } catch (const IdMismatchError& e) {
    return report(err, kIdMismatch, "id_mismatch", e.what());
  } catch (const std::invalid_argument& e) {
    return report(err, kUsage, "usage", e.what());
  } catch (const std::exception& e) {
    return report(err, kFailure, "failure", e.what());
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace chime::cli
