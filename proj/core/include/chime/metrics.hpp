#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace chime {

using Tokens = std::vector<std::string>;

/// BLEU over orders 1..n with counts clipped by the max count in any single
/// reference, geometric mean of the modified precisions, and brevity penalty
/// against the reference length closest to the candidate (shorter wins ties).
/// No smoothing: any zero precision gives 0. Empty candidate gives 0.
double bleu_n(std::span<const std::string> candidate, std::span<const Tokens> references, int n);

/// LCS-based F1 (beta = 1), best over references. Empty inputs give 0.
double rouge_l_f1(std::span<const std::string> candidate, std::span<const Tokens> references);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct SampleScores {
  std::string id;
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double rouge_l = 0.0;
};

SampleScores score_sample(const std::string& id, std::span<const std::string> candidate,
                          std::span<const Tokens> references);

struct EvalReport {
  std::vector<SampleScores> samples;
  double bleu1 = 0.0;  // corpus means, in [0, 1]
  double bleu2 = 0.0;
  double rouge_l = 0.0;
};

struct Prediction {
  std::string id;
  std::string text;
  std::vector<double> beam_scores;  // best first; empty for non-beam producers
};

struct GoldAnswers {
  std::string id;
  std::vector<std::string> texts;
};

/// Written as JSON lines {"question_id", "generated_text", "beam_scores"};
/// read back from either that form or {"id", "text"}.
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);

/// JSON lines {"id", "texts": [...]}; a plain "text" string is also accepted.
std::vector<GoldAnswers> read_gold(const std::filesystem::path& path);
void write_gold(const std::filesystem::path& path, std::span<const GoldAnswers> gold);

/// Scores every prediction against its gold references and averages per
/// sample. Throws std::invalid_argument on an empty prediction set and
/// IdMismatchError when the id sets differ.
EvalReport evaluate(std::span<const Prediction> predictions, std::span<const GoldAnswers> gold,
                    std::size_t workers = 1);
EvalReport evaluate(const std::filesystem::path& predictions, const std::filesystem::path& gold,
                    std::size_t workers = 1);

/// CSV: "model,samples,bleu1,bleu2,rouge_l_f1" and one row, 0-100 scale.
void write_report_csv(std::ostream& out, const EvalReport& report, const std::string& model_name);
/// Aligned text table in the Bleu-1 / Bleu-2 / Rouge-L F1 layout, 0-100 scale.
void write_report_table(std::ostream& out, const EvalReport& report, const std::string& model_name);

}  // namespace chime
