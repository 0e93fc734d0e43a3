#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "chime/errors.hpp"
#include "chime/instance.hpp"
#include "chime/records.hpp"
#include "chime/synthetic.hpp"
#include "chime/vocab.hpp"
#include "support.hpp"

namespace chime {
namespace {

using testing::TempDir;

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Hello,   WORLD!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_EQ(tokenize("  \t\n "), std::vector<std::string>{});
  EXPECT_EQ(tokenize("a-b"), (std::vector<std::string>{"a", "-", "b"}));
}

TEST(Tokenize, RoundTripIsIdentityUpToWhitespace) {
  const std::string text = "the battery lasts , roughly 3 hours !";
  EXPECT_EQ(join_tokens(tokenize("the  battery lasts ,\troughly 3 hours !")), text);
  EXPECT_EQ(join_tokens(tokenize(text)), text);
}

TEST(Vocab, ReservedIdsAreFixed) {
  const Vocab v;
  ASSERT_EQ(v.size(), kReservedCount);
  EXPECT_EQ(v.token(kPad), "[PAD]");
  EXPECT_EQ(v.token(kCls), "[CLS]");
  EXPECT_EQ(v.token(kSep), "[SEP]");
  EXPECT_EQ(v.token(kUnk), "[UNK]");
}

TEST(Vocab, FrequencyRankedBuild) {
  const std::vector<std::string> corpus{"a a b"};
  const auto v = build_vocab(corpus, 6);
  ASSERT_EQ(v.size(), 6u);
  ASSERT_TRUE(v.contains("a"));
  ASSERT_TRUE(v.contains("b"));
  EXPECT_LT(v.id("a"), v.id("b"));
  EXPECT_GE(v.id("a"), static_cast<TokenId>(kReservedCount));
}

TEST(Vocab, MaxSizeCutsLeastFrequent) {
  const std::vector<std::string> corpus{"x y y z z z"};
  const auto v = build_vocab(corpus, 5);
  EXPECT_TRUE(v.contains("z"));
  EXPECT_FALSE(v.contains("y"));
  EXPECT_FALSE(v.contains("x"));
}

TEST(Vocab, EqualCountsBreakLexicographically) {
  const std::vector<std::string> corpus{"q p r"};
  const auto v = build_vocab(corpus, 10);
  EXPECT_LT(v.id("p"), v.id("q"));
  EXPECT_LT(v.id("q"), v.id("r"));
}

TEST(Vocab, BuildIsDeterministic) {
  const std::vector<std::string> corpus{"one two two", "three three three one"};
  EXPECT_EQ(build_vocab(corpus, 100), build_vocab(corpus, 100));
}

TEST(Vocab, BuildErrors) {
  const std::vector<std::string> corpus{"a"};
  EXPECT_THROW(build_vocab(corpus, kReservedCount - 1), std::invalid_argument);
  EXPECT_THROW(build_vocab(std::vector<std::string>{}, 10), std::invalid_argument);
}

TEST(Vocab, UnseenTokenIsUnk) {
  const std::vector<std::string> corpus{"a a b"};
  const auto v = build_vocab(corpus, 6);
  EXPECT_EQ(v.id("zebra"), kUnk);
  EXPECT_EQ(v.encode_text("a zebra"), (std::vector<TokenId>{v.id("a"), kUnk}));
}

TEST(Vocab, DecodeDropsPad) {
  Vocab v;
  const auto a = v.add("a");
  const std::vector<TokenId> ids{a, kPad, kSep, kPad};
  EXPECT_EQ(v.decode(ids), "a [SEP]");
}

TEST(Vocab, SaveLoadPreservesEveryId) {
  const std::vector<std::string> corpus{"the cat sat on the mat , the end ."};
  const auto v = build_vocab(corpus, 100);
  TempDir dir;
  v.save(dir / "vocab.txt");
  const auto loaded = Vocab::load(dir / "vocab.txt");
  ASSERT_EQ(loaded.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    EXPECT_EQ(loaded.token(id), v.token(id));
    EXPECT_EQ(loaded.id(v.token(id)), id);
  }
}

TEST(SelectBestAnswer, HigherRateWins) {
  const std::vector<Votes> votes{{3, 4}, {1, 1}};
  EXPECT_EQ(select_best_answer(votes), 1u);
}

TEST(SelectBestAnswer, Singleton) {
  const std::vector<Votes> votes{{0, 0}};
  EXPECT_EQ(select_best_answer(votes), 0u);
}

TEST(SelectBestAnswer, EqualRateLargerTotalWins) {
  const std::vector<Votes> votes{{1, 2}, {2, 4}};
  EXPECT_EQ(select_best_answer(votes), 1u);
}

TEST(SelectBestAnswer, FullTieLowestIndexWins) {
  const std::vector<Votes> votes{{0, 3}, {2, 4}, {2, 4}};
  EXPECT_EQ(select_best_answer(votes), 1u);
}

TEST(SelectBestAnswer, Errors) {
  EXPECT_THROW(select_best_answer(std::vector<Votes>{}), std::invalid_argument);
  EXPECT_THROW(select_best_answer(std::vector<Votes>{{3, 2}}), std::invalid_argument);
}

RawRecord good_raw(std::size_t passages = 10) {
  RawRecord r;
  r.id = "q1";
  r.question_text = "How long does the battery last?";
  for (std::size_t i = 0; i < passages; ++i) r.review_snippets.push_back("review number " + std::to_string(i));
  r.answers = {{"About three hours.", {2, 3}}, {"Not long", {0, 1}}};
  r.is_answerable = true;
  r.question_type = "descriptive";
  return r;
}

TEST(FilterRecord, AcceptsValidRecord) {
  const auto out = filter_record(good_raw(), FilterConfig{});
  ASSERT_TRUE(out.accepted()) << out.reason;
  EXPECT_EQ(out.record->passages.size(), 10u);
  EXPECT_EQ(out.record->passages[3], (std::vector<std::string>{"review", "number", "3"}));
  EXPECT_EQ(out.record->answers.size(), 2u);
}

TEST(FilterRecord, RejectsYesNo) {
  auto raw = good_raw();
  raw.question_type = "yesno";
  EXPECT_EQ(filter_record(raw, FilterConfig{}).reason, "not descriptive");
}

TEST(FilterRecord, RejectsUnanswerable) {
  auto raw = good_raw();
  raw.is_answerable = false;
  EXPECT_EQ(filter_record(raw, FilterConfig{}).reason, "not answerable");
}

TEST(FilterRecord, RejectsWrongPassageCount) {
  EXPECT_EQ(filter_record(good_raw(7), FilterConfig{}).reason, "passage count");
}

TEST(FilterRecord, RejectsBadVotesAndMissingAnswers) {
  auto raw = good_raw();
  raw.answers[1].votes = {5, 2};
  EXPECT_EQ(filter_record(raw, FilterConfig{}).reason, "invalid votes");
  raw.answers.clear();
  EXPECT_EQ(filter_record(raw, FilterConfig{}).reason, "no answers");
}

TEST(FilterRecord, StripsUrls) {
  auto raw = good_raw();
  raw.review_snippets[0] = "see https://example.com/page?x=1 for www.example.org details";
  raw.answers[0].text = "Check http://foo.bar now";
  const auto out = filter_record(raw, FilterConfig{});
  ASSERT_TRUE(out.accepted());
  EXPECT_EQ(out.record->passages[0], (std::vector<std::string>{"see", "for", "details"}));
  EXPECT_EQ(out.record->answers[0], (std::vector<std::string>{"check", "now"}));
}

TEST(FilterRecord, TruncatesToCaps) {
  auto raw = good_raw();
  std::string long_review;
  for (int i = 0; i < 200; ++i) long_review += "w" + std::to_string(i) + " ";
  raw.review_snippets[2] = long_review;
  const auto out = filter_record(raw, FilterConfig{});
  ASSERT_TRUE(out.accepted());
  ASSERT_EQ(out.record->passages[2].size(), 124u);
  EXPECT_EQ(out.record->passages[2].front(), "w0");
  EXPECT_EQ(out.record->passages[2].back(), "w123");
}

TEST(FilterRecord, IsIdempotent) {
  auto raw = good_raw();
  raw.review_snippets[1] = "Visit www.shop.com, it's GREAT!!";
  std::string long_answer;
  for (int i = 0; i < 100; ++i) long_answer += "tok ";
  raw.answers[0].text = long_answer;
  const auto once = filter_record(raw, FilterConfig{});
  ASSERT_TRUE(once.accepted());
  const auto twice = filter_record(to_raw(*once.record), FilterConfig{});
  ASSERT_TRUE(twice.accepted());
  EXPECT_EQ(*twice.record, *once.record);
}

TEST(FilterRecord, MalformedLineReportsLineNumber) {
  try {
    parse_raw_record("{\"question_text\": ", 17);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
  }
  EXPECT_THROW(parse_raw_record(R"({"question_text":"q"})", 2), ParseError);
}

TEST(FilterRecord, ReadsJsonLines) {
  TempDir dir;
  {
    std::ofstream out(dir / "raw.jsonl");
    out << R"({"id":"a","question_text":"q?","review_snippets":["r1","r2"],)"
        << R"("answers":[{"text":"yes it is","helpful_votes":[1,2]}],"is_answerable":true,"question_type":"descriptive"})"
        << "\n\n"
        << R"({"qid":7,"question_text":"q2","review_snippets":[],"answers":[],"is_answerable":false,"question_type":"yesno"})"
        << "\n";
  }
  const auto raws = read_raw_records(dir / "raw.jsonl");
  ASSERT_EQ(raws.size(), 2u);
  EXPECT_EQ(raws[0].id, "a");
  EXPECT_EQ(raws[0].answers[0].votes, (Votes{1, 2}));
  EXPECT_EQ(raws[1].id, "7");
  EXPECT_FALSE(raws[1].is_answerable);
}

TEST(Records, JsonLinesRoundTrip) {
  std::mt19937_64 rng(5);
  const auto c = testing::tiny_config();
  std::vector<QARecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(testing::random_record(rng, c, 3));
  recs[2].descriptive = false;
  TempDir dir;
  write_records(dir / "r.jsonl", recs);
  EXPECT_EQ(read_records(dir / "r.jsonl"), recs);
}

std::vector<TokenId> ids(std::initializer_list<TokenId> v) { return v; }

TEST(AssembleTriple, HandLayout) {
  const auto inst = assemble_triple(ids({5}), ids({6, 7}), ids({8}), Caps{1, 2, 1});
  EXPECT_EQ(inst.part1_length, 5u);
  EXPECT_EQ(inst.part2_length, 3u);
  EXPECT_EQ(inst.tokens, ids({kCls, 5, kSep, 6, 7, kSep, 8, kSep}));
  const auto A = kSegmentA, B = kSegmentB;
  EXPECT_EQ(inst.segments, ids({A, A, A, B, B, A, A, A}));
  EXPECT_EQ(inst.positions, ids({0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(inst.pad_mask, (std::vector<std::uint8_t>(8, 1)));
  EXPECT_EQ(inst.targets, ids({8, kSep, kPad}));
  EXPECT_EQ(inst.target_mask, (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_NO_THROW(check_instance(inst));
}

TEST(AssembleTriple, RightPadding) {
  const auto inst = assemble_triple(ids({5}), ids({6}), ids({8}), Caps{2, 3, 2});
  EXPECT_EQ(inst.tokens, ids({kCls, 5, kSep, 6, kPad, kPad, kPad, kSep, 8, kSep, kPad}));
  EXPECT_EQ(inst.pad_mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0, 1, 1, 1, 0}));
  EXPECT_EQ(inst.targets, ids({8, kSep, kPad, kPad}));
  EXPECT_EQ(inst.target_mask, (std::vector<std::uint8_t>{1, 1, 0, 0}));
  EXPECT_NO_THROW(check_instance(inst));
}

TEST(AssembleTriple, GenerationPrefixIsOpen) {
  const auto inst = assemble_prefix(ids({5}), ids({6, 7}), ids({}), Caps{1, 2, 2});
  EXPECT_EQ(std::vector<TokenId>(inst.tokens.begin() + 5, inst.tokens.end()), ids({kSep, kPad, kPad, kPad}));
}

TEST(AssembleTriple, PassagesShareLength) {
  QARecord r;
  r.question = ids({5, 6});
  r.passages = {ids({7}), ids({7, 8, 9, 10})};
  const auto group = assemble_group(r, ids({11}), Caps{3, 4, 2});
  ASSERT_EQ(group.size(), 2u);
  EXPECT_EQ(group[0].part1_length, group[1].part1_length);
  EXPECT_EQ(group[0].total_length(), group[1].total_length());
}

TEST(AssembleTriple, OverCapThrows) {
  EXPECT_THROW(assemble_triple(ids({5, 5}), ids({6}), ids({8}), Caps{1, 2, 1}), std::invalid_argument);
  EXPECT_THROW(assemble_triple(ids({5}), ids({6, 6, 6}), ids({8}), Caps{1, 2, 1}), std::invalid_argument);
  EXPECT_THROW(assemble_triple(ids({5}), ids({6}), ids({8, 8}), Caps{1, 2, 1}), std::invalid_argument);
}

TEST(AssembleTriple, InvariantsHoldOnRandomRecords) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto c = testing::tiny_config();
    c.caps = {1 + rng() % 6, 1 + rng() % 9, 1 + rng() % 5};
    const auto passages = 1 + rng() % 4;
    const auto r = testing::random_record(rng, c, passages);
    const auto group = assemble_group(r, r.answers[0], c.caps);
    ASSERT_EQ(group.size(), passages);
    for (const auto& inst : group) {
      ASSERT_NO_THROW(check_instance(inst)) << "trial " << trial;
      ASSERT_EQ(inst.part1_length, group[0].part1_length);
      ASSERT_EQ(inst.part2_length, group[0].part2_length);
      ASSERT_EQ(inst.total_length(), c.layout().total());
    }
  }
}

TEST(CheckInstance, DetectsCorruption) {
  auto inst = assemble_triple(ids({5}), ids({6, 7}), ids({8}), Caps{1, 2, 1});
  auto bad = inst;
  bad.segments[6] = kSegmentB;
  EXPECT_THROW(check_instance(bad), std::logic_error);
  bad = inst;
  bad.targets[0] = 9;
  EXPECT_THROW(check_instance(bad), std::logic_error);
  bad = inst;
  bad.tokens[5] = 9;
  EXPECT_THROW(check_instance(bad), std::logic_error);
}

std::size_t count(const std::vector<TokenId>& v, TokenId t) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), t));
}

TEST(Synthetic, SameSeedIsIdentical) {
  SyntheticConfig sc;
  sc.seed = 11;
  const auto a = gen_synthetic(sc);
  const auto b = gen_synthetic(sc);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.vocab, b.vocab);
  sc.seed = 12;
  EXPECT_NE(gen_synthetic(sc).records, a.records);
}

TEST(Synthetic, MajorityGoldIsStrictMajority) {
  SyntheticConfig sc;
  sc.seed = 3;
  sc.questions = 200;
  sc.task = SyntheticTask::majority_opinion;
  const auto corpus = gen_synthetic(sc);
  const auto yes = corpus.vocab.id("yes"), no = corpus.vocab.id("no");
  for (const auto& r : corpus.records) {
    ASSERT_EQ(r.passages.size(), sc.passages);
    std::size_t yes_count = 0, no_count = 0;
    for (const auto& p : r.passages) {
      yes_count += count(p, yes);
      no_count += count(p, no);
    }
    ASSERT_EQ(yes_count + no_count, sc.passages);
    ASSERT_NE(yes_count, no_count);
    const auto gold = r.answers[select_best_answer(r.votes)];
    ASSERT_EQ(gold, ids({yes_count > no_count ? yes : no}));
  }
}

TEST(Synthetic, KeyLookupWithOnePassage) {
  SyntheticConfig sc;
  sc.seed = 9;
  sc.questions = 100;
  sc.passages = 1;
  sc.task = SyntheticTask::key_lookup;
  const auto corpus = gen_synthetic(sc);
  const auto key = corpus.vocab.id("key"), val = corpus.vocab.id("val");
  for (const auto& r : corpus.records) {
    ASSERT_EQ(r.passages.size(), 1u);
    const auto& p = r.passages[0];
    const auto k = r.question.back();
    const auto gold = r.answers[select_best_answer(r.votes)];
    ASSERT_EQ(gold.size(), 1u);
    bool found = false;
    for (std::size_t i = 0; i + 3 < p.size(); ++i)
      found = found || (p[i] == key && p[i + 1] == k && p[i + 2] == val && p[i + 3] == gold[0]);
    ASSERT_TRUE(found) << r.id;
  }
}

TEST(Synthetic, RecordsFitDeclaredCapsAndVocab) {
  SyntheticConfig sc;
  sc.questions = 50;
  const auto corpus = gen_synthetic(sc);
  EXPECT_EQ(corpus.vocab.size(), sc.vocab_size);
  const auto caps = sc.caps();
  for (const auto& r : corpus.records) {
    EXPECT_LE(r.question.size(), caps.question);
    for (const auto& p : r.passages) {
      EXPECT_LE(p.size(), caps.passage);
      for (auto t : p) EXPECT_LT(static_cast<std::size_t>(t), sc.vocab_size);
    }
    for (const auto& a : r.answers) EXPECT_LE(a.size(), caps.answer);
    for (const auto& v : r.votes) EXPECT_LE(v.positive, v.total);
  }
}

TEST(Synthetic, ImpossibleParametersThrow) {
  SyntheticConfig sc;
  sc.vocab_size = 15;
  EXPECT_THROW(gen_synthetic(sc), std::invalid_argument);
  sc = {};
  sc.passages = 0;
  EXPECT_THROW(gen_synthetic(sc), std::invalid_argument);
  EXPECT_THROW(synthetic_task_from_string("nope"), std::invalid_argument);
}

}  // namespace
}  // namespace chime
