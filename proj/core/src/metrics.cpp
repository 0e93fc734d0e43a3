#include "chime/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "chime/errors.hpp"
#include "chime/parallel.hpp"
#include "chime/vocab.hpp"

namespace chime {

using nlohmann::json;

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + len))];
  }
  return counts;
}

std::size_t closest_reference_length(std::size_t c, std::span<const Tokens> references) {
  std::size_t best = references.front().size();
  for (const auto& r : references) {
    const auto d = r.size() > c ? r.size() - c : c - r.size();
    const auto bd = best > c ? best - c : c - best;
    if (d < bd || (d == bd && r.size() < best)) best = r.size();
  }
  return best;
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path, T (*parse)(const json&, std::size_t)) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(line), line_no));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return out;
}

Prediction parse_prediction(const json& j, std::size_t line_no) {
  const char* id_key = j.contains("question_id") ? "question_id" : "id";
  const char* text_key = j.contains("generated_text") ? "generated_text" : "text";
  if (!j.contains(id_key) || !j.contains(text_key)) {
    throw ParseError("prediction needs \"question_id\"/\"id\" and \"generated_text\"/\"text\"", line_no);
  }
  Prediction p{j.at(id_key).get<std::string>(), j.at(text_key).get<std::string>(), {}};
  if (j.contains("beam_scores")) p.beam_scores = j.at("beam_scores").get<std::vector<double>>();
  return p;
}

GoldAnswers parse_gold(const json& j, std::size_t line_no) {
  GoldAnswers g;
  if (!j.contains("id")) throw ParseError("gold record needs \"id\"", line_no);
  g.id = j.at("id").get<std::string>();
  if (j.contains("texts")) {
    g.texts = j.at("texts").get<std::vector<std::string>>();
  } else if (j.contains("text")) {
    g.texts.push_back(j.at("text").get<std::string>());
  }
  if (g.texts.empty()) throw ParseError("gold record " + g.id + " has no reference texts", line_no);
  return g;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? "," : "") + ids[i];
  if (ids.size() > 20) out += ",... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

double bleu_n(std::span<const std::string> candidate, std::span<const Tokens> references, int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("bleu_n: order must be in [1, 4], got " + std::to_string(n));
  if (references.empty()) throw std::invalid_argument("bleu_n: no references");
  if (candidate.empty()) {
    spdlog::warn("bleu: empty candidate scores 0");
    return 0.0;
  }
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto cand = ngrams(candidate, k);
    int total = 0;
    for (const auto& [gram, count] : cand) total += count;
    if (total == 0) return 0.0;
    std::vector<NgramCounts> refs;
    for (const auto& r : references) refs.push_back(ngrams(r, k));
    int clipped = 0;
    for (const auto& [gram, count] : cand) {
      int max_ref = 0;
      for (const auto& r : refs) {
        const auto it = r.find(gram);
        if (it != r.end()) max_ref = std::max(max_ref, it->second);
      }
      clipped += std::min(count, max_ref);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  const auto c = candidate.size();
  const auto r = closest_reference_length(c, references);
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return bp * std::exp(log_sum / n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::span<const std::string> candidate, std::span<const Tokens> references) {
  if (candidate.empty() || references.empty()) {
    spdlog::warn("rouge-l: empty candidate or reference set scores 0");
    return 0.0;
  }
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const auto lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(ref.size());
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

SampleScores score_sample(const std::string& id, std::span<const std::string> candidate,
                          std::span<const Tokens> references) {
  return {id, bleu_n(candidate, references, 1), bleu_n(candidate, references, 2), rouge_l_f1(candidate, references)};
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  return read_jsonl<Prediction>(path, parse_prediction);
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : predictions)
    out << json{{"question_id", p.id}, {"generated_text", p.text}, {"beam_scores", p.beam_scores}}.dump() << '\n';
}

std::vector<GoldAnswers> read_gold(const std::filesystem::path& path) { return read_jsonl<GoldAnswers>(path, parse_gold); }

void write_gold(const std::filesystem::path& path, std::span<const GoldAnswers> gold) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& g : gold) out << json{{"id", g.id}, {"texts", g.texts}}.dump() << '\n';
}

EvalReport evaluate(std::span<const Prediction> predictions, std::span<const GoldAnswers> gold, std::size_t workers) {
  if (predictions.empty()) throw std::invalid_argument("evaluate: no predictions");
  std::map<std::string, const GoldAnswers*> by_id;
  for (const auto& g : gold) by_id[g.id] = &g;
  std::set<std::string> predicted;
  std::vector<std::string> missing;
  for (const auto& p : predictions) {
    if (!predicted.insert(p.id).second) throw std::invalid_argument("evaluate: duplicate prediction id " + p.id);
    if (!by_id.contains(p.id)) missing.push_back(p.id);
  }
  if (!missing.empty()) {
    throw IdMismatchError("evaluate: predictions without gold: " + join_ids(missing), missing);
  }
  for (const auto& [id, g] : by_id)
    if (!predicted.contains(id)) missing.push_back(id);
  if (!missing.empty()) {
    throw IdMismatchError("evaluate: gold ids without predictions: " + join_ids(missing), missing);
  }

  EvalReport report;
  report.samples.resize(predictions.size());
  parallel_for(predictions.size(), workers, [&](std::size_t i) {
    const auto& p = predictions[i];
    std::vector<Tokens> refs;
    for (const auto& t : by_id.at(p.id)->texts) refs.push_back(tokenize(t));
    report.samples[i] = score_sample(p.id, tokenize(p.text), refs);
  });
  for (const auto& s : report.samples) {
    report.bleu1 += s.bleu1;
    report.bleu2 += s.bleu2;
    report.rouge_l += s.rouge_l;
  }
  const auto n = static_cast<double>(report.samples.size());
  report.bleu1 /= n;
  report.bleu2 /= n;
  report.rouge_l /= n;
  return report;
}

EvalReport evaluate(const std::filesystem::path& predictions, const std::filesystem::path& gold,
                    std::size_t workers) {
  const auto preds = read_predictions(predictions);
  if (preds.empty()) throw std::invalid_argument("evaluate: predictions file " + predictions.string() + " is empty");
  return evaluate(preds, read_gold(gold), workers);
}

void write_report_csv(std::ostream& out, const EvalReport& report, const std::string& model_name) {
  out << "model,samples,bleu1,bleu2,rouge_l_f1\n"
      << model_name << ',' << report.samples.size() << std::fixed << std::setprecision(3) << ','
      << report.bleu1 * 100 << ',' << report.bleu2 * 100 << ',' << report.rouge_l * 100 << '\n';
  out.unsetf(std::ios::floatfield);
}

void write_report_table(std::ostream& out, const EvalReport& report, const std::string& model_name) {
  const auto width = std::max<std::size_t>(model_name.size(), 5);
  out << std::left << std::setw(static_cast<int>(width)) << "Model" << "  " << std::right << std::setw(8) << "Bleu-1"
      << "  " << std::setw(8) << "Bleu-2" << "  " << std::setw(10) << "Rouge-L F1" << '\n';
  out << std::left << std::setw(static_cast<int>(width)) << model_name << "  " << std::right << std::fixed
      << std::setprecision(3) << std::setw(8) << report.bleu1 * 100 << "  " << std::setw(8) << report.bleu2 * 100
      << "  " << std::setw(10) << report.rouge_l * 100 << '\n';
  out << "(" << report.samples.size() << " samples; multi-reference n-gram clipping)\n";
  out.unsetf(std::ios::floatfield);
}

}  // namespace chime
