#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chime/vocab.hpp"

namespace chime {

/// Helpfulness votes for one answer: 0 <= positive <= total.
struct Votes {
  int positive = 0;
  int total = 0;

  bool operator==(const Votes&) const = default;
};

/// Token caps for question, passage, and answer text.
struct Caps {
  std::size_t question = 40;
  std::size_t passage = 124;
  std::size_t answer = 82;

  bool operator==(const Caps&) const = default;
};

/// One AmazonQA-style JSON line before filtering.
struct RawAnswer {
  std::string text;
  Votes votes;
};

struct RawRecord {
  std::string id;
  std::string question_text;
  std::vector<std::string> review_snippets;
  std::vector<RawAnswer> answers;
  bool is_answerable = false;
  std::string question_type;
};

/// A filtered record in tokenized text form.
struct TextRecord {
  std::string id;
  std::vector<std::string> question;
  std::vector<std::vector<std::string>> passages;
  std::vector<std::vector<std::string>> answers;
  std::vector<Votes> votes;

  bool operator==(const TextRecord&) const = default;
};

/// One question with its K passages and candidate answers, as token ids.
struct QARecord {
  std::string id;
  std::vector<TokenId> question;
  std::vector<std::vector<TokenId>> passages;
  std::vector<std::vector<TokenId>> answers;
  std::vector<Votes> votes;
  bool answerable = true;
  bool descriptive = true;

  bool operator==(const QARecord&) const = default;
};

struct FilterConfig {
  std::size_t passages = 10;
  Caps caps;
};

struct FilterOutcome {
  std::optional<TextRecord> record;
  std::string reason;  // empty when accepted

  bool accepted() const { return record.has_value(); }
};

/// Parses one JSON line. Throws ParseError carrying `line_no`.
RawRecord parse_raw_record(std::string_view line, std::size_t line_no);
std::vector<RawRecord> read_raw_records(const std::filesystem::path& path);

std::string strip_urls(std::string_view text);

/// Keeps answerable descriptive questions with exactly `config.passages`
/// snippets (order preserved), strips URLs, tokenizes and truncates to caps.
/// Rejection reasons: "not answerable", "not descriptive", "passage count",
/// "no answers", "invalid votes", "empty question".
FilterOutcome filter_record(const RawRecord& raw, const FilterConfig& config);

/// Inverse view of a filtered record, so filtering can be reapplied.
RawRecord to_raw(const TextRecord& record);

QARecord encode_record(const TextRecord& record, const Vocab& vocab);

/// Index of the answer with the highest positive-vote rate. Ties go to the
/// larger vote total, then the lowest index. Zero-vote answers rate 0.
std::size_t select_best_answer(std::span<const Votes> votes);

/// JSON-lines persistence of id-encoded records.
void write_records(const std::filesystem::path& path, std::span<const QARecord> records);
std::vector<QARecord> read_records(const std::filesystem::path& path);

}  // namespace chime
