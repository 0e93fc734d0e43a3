#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "chime/records.hpp"
#include "chime/vocab.hpp"

namespace chime {

enum class SyntheticTask {
  key_lookup,        // one passage holds "key k val v"; the answer is v
  majority_opinion,  // passages say "opinion yes|no"; the answer is the strict majority
  mixed,             // alternate the two per question
};

std::string to_string(SyntheticTask task);
SyntheticTask synthetic_task_from_string(const std::string& name);

struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t questions = 32;
  std::size_t passages = 5;
  std::size_t vocab_size = 32;
  std::size_t passage_length = 8;
  SyntheticTask task = SyntheticTask::mixed;

  /// Smallest caps that hold every generated record.
  Caps caps() const { return {4, passage_length, 2}; }
};

struct SyntheticCorpus {
  Vocab vocab;
  std::vector<QARecord> records;
  std::vector<SyntheticTask> tasks;  // per record
};

/// Deterministic in the config. Every record carries the gold answer (rate
/// 1.0) plus one or two lower-rated distractor answers.
SyntheticCorpus gen_synthetic(const SyntheticConfig& config);

}  // namespace chime
