#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chime/config.hpp"
#include "chime/model.hpp"
#include "chime/optim.hpp"
#include "chime/records.hpp"

namespace chime {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Everything needed to resume training bit-exactly.
struct Checkpoint {
  ModelConfig config;
  std::vector<NamedTensor> params;
  OptimState optimizer;
  std::int64_t step = 0;
  std::string rng_state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little-endian): 8-byte magic "CHIMECKP", u32 version,
/// u64 header length, JSON header (config, step, rng state, tensor names and
/// shapes), then float64 payloads: every parameter, every first moment,
/// every second moment, in header order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws IncompatibleError on a bad magic or unsupported version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and also rejects checkpoints whose architecture differs from
/// `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Copies checkpoint tensors into a freshly built model. Throws
/// IncompatibleError on a missing name or shape mismatch.
void restore_parameters(ChimeModel& model, const std::vector<NamedTensor>& params);
ChimeModel model_from_checkpoint(const Checkpoint& checkpoint);

struct TrainLogEntry {
  std::int64_t step = 0;  // 1-based index of the optimizer step just taken
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const TrainLogEntry& entry);

/// Owns the model, optimizer state and RNG for one training run. One
/// optimizer step consumes config.grad_accum question groups; each group is
/// assembled with its vote-selected best answer, read through all passages,
/// and contributes one loss/backward.
class Trainer {
 public:
  Trainer(const ModelConfig& config, std::vector<QARecord> dataset);
  Trainer(const Checkpoint& checkpoint, std::vector<QARecord> dataset);

  std::int64_t total_steps() const noexcept { return total_steps_; }
  std::int64_t step() const noexcept { return optim_.t; }
  bool done() const noexcept { return step() >= total_steps_; }

  /// Throws NumericError naming the step and question on a non-finite loss.
  TrainLogEntry train_step();

  /// Runs until `until_step` (or the end of the schedule when negative).
  std::vector<TrainLogEntry> run(std::int64_t until_step = -1,
                                 const std::function<void(const TrainLogEntry&)>& on_step = {});

  Checkpoint checkpoint() const;

  const ChimeModel& model() const noexcept { return *model_; }
  ChimeModel& model() noexcept { return *model_; }
  const std::vector<QARecord>& dataset() const noexcept { return dataset_; }

 private:
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;

  std::unique_ptr<ChimeModel> model_;
  std::vector<QARecord> dataset_;
  OptimState optim_;
  std::mt19937_64 rng_;
  std::int64_t total_steps_ = 0;
  std::size_t steps_per_epoch_ = 0;
};

/// Token-weighted mean cross-entropy of each record's vote-selected best
/// answer, read through all passages without dropout or gradients.
double corpus_loss(const ChimeModel& model, std::span<const QARecord> records);

/// Fraction of records whose greedy decode equals the best answer exactly.
double exact_match_rate(const ChimeModel& model, std::span<const QARecord> records);

/// Trains to completion from scratch.
Checkpoint train(const ModelConfig& config, std::vector<QARecord> dataset,
                 const std::function<void(const TrainLogEntry&)>& on_step = {});

}  // namespace chime
