#include "chime/records.hpp"

#include <fstream>
#include <regex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "chime/errors.hpp"

namespace chime {

using nlohmann::json;

namespace {

std::vector<std::string> truncated(std::vector<std::string> tokens, std::size_t cap) {
  if (tokens.size() > cap) tokens.resize(cap);
  return tokens;
}

std::vector<std::string> clean(const std::string& text, std::size_t cap) {
  return truncated(tokenize(strip_urls(text)), cap);
}

}  // namespace

std::string strip_urls(std::string_view text) {
  static const std::regex url(R"((https?://|ftp://|www\.)[^\s]+)", std::regex::icase);
  std::string out = std::regex_replace(std::string(text), url, " ");
  return out;
}

RawRecord parse_raw_record(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  try {
    RawRecord raw;
    if (j.contains("id")) {
      raw.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    } else if (j.contains("qid")) {
      raw.id = j["qid"].is_string() ? j["qid"].get<std::string>() : j["qid"].dump();
    } else {
      raw.id = "line-" + std::to_string(line_no);
    }
    raw.question_text = j.at("question_text").get<std::string>();
    raw.review_snippets = j.at("review_snippets").get<std::vector<std::string>>();
    for (const auto& a : j.at("answers")) {
      RawAnswer answer;
      answer.text = a.at("text").get<std::string>();
      const auto votes = a.at("helpful_votes").get<std::vector<int>>();
      if (votes.size() != 2) throw ParseError("helpful_votes must have two entries", line_no);
      answer.votes = {votes[0], votes[1]};
      raw.answers.push_back(std::move(answer));
    }
    raw.is_answerable = j.at("is_answerable").get<bool>();
    raw.question_type = j.at("question_type").get<std::string>();
    return raw;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad record field: ") + e.what(), line_no);
  }
}

std::vector<RawRecord> read_raw_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_raw_record(line, line_no));
  }
  return out;
}

FilterOutcome filter_record(const RawRecord& raw, const FilterConfig& config) {
  auto reject = [](std::string reason) { return FilterOutcome{std::nullopt, std::move(reason)}; };
  if (!raw.is_answerable) return reject("not answerable");
  if (raw.question_type != "descriptive") return reject("not descriptive");
  if (raw.review_snippets.size() != config.passages) return reject("passage count");

  TextRecord rec;
  rec.id = raw.id;
  rec.question = clean(raw.question_text, config.caps.question);
  if (rec.question.empty()) return reject("empty question");
  for (const auto& snippet : raw.review_snippets) rec.passages.push_back(clean(snippet, config.caps.passage));
  for (const auto& a : raw.answers) {
    if (a.votes.positive < 0 || a.votes.total < a.votes.positive) return reject("invalid votes");
    auto tokens = clean(a.text, config.caps.answer);
    if (tokens.empty()) continue;
    rec.answers.push_back(std::move(tokens));
    rec.votes.push_back(a.votes);
  }
  if (rec.answers.empty()) return reject("no answers");
  return {std::move(rec), {}};
}

RawRecord to_raw(const TextRecord& record) {
  RawRecord raw;
  raw.id = record.id;
  raw.question_text = join_tokens(record.question);
  for (const auto& p : record.passages) raw.review_snippets.push_back(join_tokens(p));
  for (std::size_t i = 0; i < record.answers.size(); ++i) {
    raw.answers.push_back({join_tokens(record.answers[i]), record.votes[i]});
  }
  raw.is_answerable = true;
  raw.question_type = "descriptive";
  return raw;
}

QARecord encode_record(const TextRecord& record, const Vocab& vocab) {
  QARecord out;
  out.id = record.id;
  out.question = vocab.encode(record.question);
  for (const auto& p : record.passages) out.passages.push_back(vocab.encode(p));
  for (const auto& a : record.answers) out.answers.push_back(vocab.encode(a));
  out.votes = record.votes;
  return out;
}

std::size_t select_best_answer(std::span<const Votes> votes) {
  if (votes.empty()) throw std::invalid_argument("select_best_answer: no answers");
  auto rate = [](const Votes& v) { return v.total > 0 ? static_cast<double>(v.positive) / v.total : 0.0; };
  std::size_t best = 0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const auto& v = votes[i];
    if (v.positive < 0 || v.total < v.positive) throw std::invalid_argument("select_best_answer: invalid vote bounds");
    if (i == 0) continue;
    // Cross-multiplied comparison avoids rounding between equal rates.
    const long long lhs = static_cast<long long>(v.positive) * votes[best].total;
    const long long rhs = static_cast<long long>(votes[best].positive) * v.total;
    const bool both_rated = v.total > 0 && votes[best].total > 0;
    const bool better = both_rated ? lhs > rhs : rate(v) > rate(votes[best]);
    const bool tie = both_rated ? lhs == rhs : rate(v) == rate(votes[best]);
    if (better || (tie && v.total > votes[best].total)) best = i;
  }
  return best;
}

void write_records(const std::filesystem::path& path, std::span<const QARecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["question"] = r.question;
    j["passages"] = r.passages;
    j["answers"] = r.answers;
    json votes = json::array();
    for (const auto& v : r.votes) votes.push_back({v.positive, v.total});
    j["votes"] = votes;
    j["answerable"] = r.answerable;
    j["descriptive"] = r.descriptive;
    out << j.dump() << '\n';
  }
}

std::vector<QARecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<QARecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      QARecord r;
      r.id = j.at("id").get<std::string>();
      r.question = j.at("question").get<std::vector<TokenId>>();
      r.passages = j.at("passages").get<std::vector<std::vector<TokenId>>>();
      r.answers = j.at("answers").get<std::vector<std::vector<TokenId>>>();
      for (const auto& v : j.at("votes")) r.votes.push_back({v.at(0).get<int>(), v.at(1).get<int>()});
      r.answerable = j.value("answerable", true);
      r.descriptive = j.value("descriptive", true);
      if (r.votes.size() != r.answers.size()) throw ParseError("votes/answers length mismatch", line_no);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace chime
