#include "chime/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "chime/errors.hpp"

namespace chime {

namespace {

constexpr const char* kReservedTokens[kReservedCount] = {"[PAD]", "[CLS]", "[SEP]", "[UNK]"};

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

bool is_ascii_space(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::isspace(u);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      const auto u = static_cast<unsigned char>(c);
      current.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : c);
    }
  }
  flush();
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() {
  for (const char* t : kReservedTokens) add(t);
}

TokenId Vocab::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::invalid_argument("token id " + std::to_string(id) + " out of vocabulary range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<TokenId> Vocab::encode_text(std::string_view text) const {
  const auto tokens = tokenize(text);
  return encode(tokens);
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (auto id : ids) {
    if (id == kPad) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file " + path.string());
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("vocabulary line lacks a tab", line_no);
    const std::string token = line.substr(0, tab);
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("vocabulary id is not an integer", line_no);
    }
    if (id < kReservedCount) {
      if (token != kReservedTokens[id]) throw ParseError("reserved id " + std::to_string(id) + " has wrong token", line_no);
      continue;
    }
    if (id != vocab.size() || vocab.contains(token)) throw ParseError("vocabulary ids must be dense and unique", line_no);
    vocab.add(token);
  }
  return vocab;
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size) {
  if (max_size < kReservedCount) {
    throw std::invalid_argument("build_vocab: max_size " + std::to_string(max_size) + " below reserved count");
  }
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus)
    for (auto& t : tokenize(text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab vocab;
  for (const auto& [token, count] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.add(token);
  }
  return vocab;
}

}  // namespace chime
