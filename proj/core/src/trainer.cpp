#include "chime/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "chime/decoder.hpp"
#include "chime/errors.hpp"
#include "chime/instance.hpp"
#include "chime/ops.hpp"

namespace chime {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'H', 'I', 'M', 'E', 'C', 'K', 'P'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IncompatibleError("checkpoint truncated");
  return value;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in, std::size_t n) {
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IncompatibleError("checkpoint truncated");
  return values;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void round_to_float(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  json header;
  header["config"] = json::parse(cp.config.to_json());
  header["step"] = cp.step;
  header["optimizer_t"] = cp.optimizer.t;
  header["rng_state"] = cp.rng_state;
  json tensors = json::array();
  for (const auto& p : cp.params) tensors.push_back({{"name", p.name}, {"shape", p.shape}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : cp.params) write_doubles(out, p.values);
  for (const auto& m : cp.optimizer.m) write_doubles(out, m);
  for (const auto& v : cp.optimizer.v) write_doubles(out, v);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IncompatibleError("not a chime checkpoint");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IncompatibleError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IncompatibleError("checkpoint truncated");

  Checkpoint cp;
  try {
    const auto header = json::parse(text);
    cp.config = ModelConfig::from_json(header.at("config").dump());
    cp.step = header.at("step").get<std::int64_t>();
    cp.optimizer.t = header.at("optimizer_t").get<std::int64_t>();
    cp.rng_state = header.at("rng_state").get<std::string>();
    for (const auto& t : header.at("tensors")) {
      cp.params.push_back({t.at("name").get<std::string>(), t.at("shape").get<Shape>(), {}});
    }
  } catch (const json::exception& e) {
    throw IncompatibleError(std::string("checkpoint header unreadable: ") + e.what());
  }
  for (auto& p : cp.params) p.values = read_doubles(in, shape_numel(p.shape));
  for (auto& p : cp.params) cp.optimizer.m.push_back(read_doubles(in, shape_numel(p.shape)));
  for (auto& p : cp.params) cp.optimizer.v.push_back(read_doubles(in, shape_numel(p.shape)));
  return cp;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  auto cp = load_checkpoint(path);
  if (!cp.config.same_architecture(expected)) {
    throw IncompatibleError("checkpoint architecture does not match the requested config (d_model " +
                            std::to_string(cp.config.d_model) + " vs " + std::to_string(expected.d_model) +
                            ", variant " + to_string(cp.config.variant) + " vs " + to_string(expected.variant) + ")");
  }
  return cp;
}

void restore_parameters(ChimeModel& model, const std::vector<NamedTensor>& params) {
  auto dst = model.parameters();
  if (dst.size() != params.size()) {
    throw IncompatibleError("checkpoint has " + std::to_string(params.size()) + " tensors, model expects " +
                            std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || dst[i].tensor.shape() != params[i].shape) {
      throw IncompatibleError("checkpoint tensor " + params[i].name + shape_string(params[i].shape) +
                              " does not match model tensor " + dst[i].name + shape_string(dst[i].tensor.shape()));
    }
    std::copy(params[i].values.begin(), params[i].values.end(), dst[i].tensor.mutable_data().begin());
  }
}

ChimeModel model_from_checkpoint(const Checkpoint& checkpoint) {
  ChimeModel model(checkpoint.config);
  restore_parameters(model, checkpoint.params);
  return model;
}

void write_log_header(std::ostream& out) { out << "step,lr,loss,grad_norm\n"; }

void write_log_row(std::ostream& out, const TrainLogEntry& e) {
  out << e.step << ',' << std::setprecision(17) << e.lr << ',' << e.loss << ',' << e.grad_norm << '\n';
}

Trainer::Trainer(const ModelConfig& config, std::vector<QARecord> dataset)
    : model_(std::make_unique<ChimeModel>(config)),
      dataset_(std::move(dataset)),
      rng_(mix_seed(config.seed, 0xD0)) {
  if (dataset_.empty()) throw std::invalid_argument("train: dataset is empty");
  for (const auto& r : dataset_) {
    if (r.passages.size() != config.passages) {
      throw std::invalid_argument("train: record " + r.id + " has " + std::to_string(r.passages.size()) +
                                  " passages, config expects " + std::to_string(config.passages));
    }
  }
  steps_per_epoch_ = (dataset_.size() + config.grad_accum - 1) / config.grad_accum;
  total_steps_ = config.total_steps > 0 ? config.total_steps
                                        : static_cast<std::int64_t>(config.epochs * steps_per_epoch_);
  optim_ = OptimState::zeros_like(model_->parameters());
  if (config.precision == Precision::f32)
    for (auto& p : model_->parameters()) round_to_float(p.tensor.mutable_data());
}

Trainer::Trainer(const Checkpoint& checkpoint, std::vector<QARecord> dataset)
    : Trainer(checkpoint.config, std::move(dataset)) {
  restore_parameters(*model_, checkpoint.params);
  if (checkpoint.optimizer.m.size() != optim_.m.size()) throw IncompatibleError("optimizer state size mismatch");
  optim_ = checkpoint.optimizer;
  if (optim_.t != checkpoint.step) throw IncompatibleError("checkpoint step and optimizer counter disagree");
  std::istringstream state(checkpoint.rng_state);
  state >> rng_;
  if (!state) throw IncompatibleError("checkpoint RNG state unreadable");
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order(dataset_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(mix_seed(model_->config().seed, 0x5EED0000 + epoch));
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  return order;
}

TrainLogEntry Trainer::train_step() {
  if (done()) throw std::logic_error("train_step: schedule already complete");
  const auto& config = model_->config();
  PrecisionGuard precision(config.precision);

  const auto s = static_cast<std::size_t>(step());
  const auto epoch = s / steps_per_epoch_;
  const auto slot = s % steps_per_epoch_;
  const auto order = epoch_order(epoch);
  const auto begin = slot * config.grad_accum;
  const auto end = std::min(order.size(), begin + config.grad_accum);
  const double weight = 1.0 / static_cast<double>(end - begin);

  model_->zero_grad();
  std::mt19937_64* dropout_rng = config.dropout > 0.0 ? &rng_ : nullptr;
  double loss_total = 0.0;
  for (auto i = begin; i < end; ++i) {
    const auto& record = dataset_[order[i]];
    const auto best = select_best_answer(record.votes);
    auto answer = record.answers[best];
    if (answer.size() > config.caps.answer) answer.resize(config.caps.answer);
    const auto instances = assemble_group(record, answer, config.caps);
    const Tensor loss = model_->loss(instances, dropout_rng);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at step " + std::to_string(s + 1) + ", question " + record.id);
    }
    loss_total += value * weight;
    (weight == 1.0 ? loss : scale(loss, weight)).backward();
  }

  TrainLogEntry entry;
  entry.grad_norm = clip_global_norm(model_->parameters(), config.clip_norm);
  entry.step = step() + 1;
  entry.lr = lr_at(entry.step, total_steps_, config.peak_lr, config.warmup_fraction);
  entry.loss = loss_total;
  adamw_step(model_->parameters(), optim_, entry.lr, config.adamw);
  if (config.precision == Precision::f32)
    for (auto& p : model_->parameters()) round_to_float(p.tensor.mutable_data());
  return entry;
}

std::vector<TrainLogEntry> Trainer::run(std::int64_t until_step,
                                        const std::function<void(const TrainLogEntry&)>& on_step) {
  const auto stop = until_step < 0 ? total_steps_ : std::min(until_step, total_steps_);
  std::vector<TrainLogEntry> log;
  while (step() < stop) {
    log.push_back(train_step());
    if (on_step) on_step(log.back());
  }
  return log;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint cp;
  cp.config = model_->config();
  for (const auto& p : model_->parameters()) {
    cp.params.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  cp.optimizer = optim_;
  cp.step = step();
  std::ostringstream state;
  state << rng_;
  cp.rng_state = state.str();
  return cp;
}

namespace {

std::vector<TokenId> best_answer(const QARecord& record, const Caps& caps) {
  auto answer = record.answers[select_best_answer(record.votes)];
  if (answer.size() > caps.answer) answer.resize(caps.answer);
  return answer;
}

}  // namespace

double corpus_loss(const ChimeModel& model, std::span<const QARecord> records) {
  if (records.empty()) throw std::invalid_argument("corpus_loss: no records");
  const auto& config = model.config();
  NoGradGuard no_grad;
  PrecisionGuard precision(config.precision);
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& r : records) {
    const auto instances = assemble_group(r, best_answer(r, config.caps), config.caps);
    std::size_t n = 0;
    for (auto m : instances.front().target_mask) n += m != 0;
    const auto fwd = model.forward(instances);
    total += answer_loss(fwd.logits, instances.front().targets, instances.front().target_mask).item() *
             static_cast<double>(n);
    tokens += n;
  }
  return total / static_cast<double>(tokens);
}

double exact_match_rate(const ChimeModel& model, std::span<const QARecord> records) {
  if (records.empty()) throw std::invalid_argument("exact_match_rate: no records");
  GenerationConfig gen;
  gen.max_length = model.config().caps.answer;
  gen.beam_width = 1;
  std::size_t hits = 0;
  for (const auto& r : records) hits += greedy_decode(model, r, gen) == best_answer(r, model.config().caps);
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

Checkpoint train(const ModelConfig& config, std::vector<QARecord> dataset,
                 const std::function<void(const TrainLogEntry&)>& on_step) {
  Trainer trainer(config, std::move(dataset));
  trainer.run(-1, on_step);
  return trainer.checkpoint();
}

}  // namespace chime
