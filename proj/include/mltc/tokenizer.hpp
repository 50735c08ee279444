#pragma once

// Word-level vocabulary and fixed-length model inputs.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mltc/error.hpp"
#include "mltc/textprep.hpp"

namespace mltc {

using TokenId = std::int32_t;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kCls = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kMask = 4;
inline constexpr TokenId kCount = 5;
inline constexpr const char* kNames[kCount] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}  // namespace special

inline bool is_special(TokenId id) { return id >= 0 && id < special::kCount; }

class Vocab {
 public:
  Vocab() {
    for (TokenId i = 0; i < special::kCount; ++i) add(special::kNames[i]);
  }

  /// Builds from an ordered list that must start with the five special tokens.
  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < special::kCount) throw InputError("token vocabulary shorter than the special-token block");
    for (TokenId i = 0; i < special::kCount; ++i)
      if (tokens[static_cast<std::size_t>(i)] != special::kNames[i])
        throw InputError(std::string("token vocabulary must start with ") + special::kNames[i] + " at id " +
                         std::to_string(i));
    Vocab v;
    for (std::size_t i = special::kCount; i < tokens.size(); ++i) {
      if (v.token_to_id_.count(tokens[i])) throw InputError("duplicate token '" + tokens[i] + "' in vocabulary");
      v.add(tokens[i]);
    }
    return v;
  }

  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  TokenId id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? special::kUnk : it->second;
  }

  const std::string& token_of(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= size())
      throw InputError("token id " + std::to_string(id) + " out of range [0, " + std::to_string(size()) + ")");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  bool operator==(const Vocab& o) const { return id_to_token_ == o.id_to_token_; }

 private:
  void add(const std::string& token) {
    token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(token);
  }

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct TokenizedInput {
  std::vector<TokenId> input_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<std::uint8_t> segment_ids;
  std::size_t true_length = 0;

  std::size_t max_len() const { return input_ids.size(); }
};

/// Frequency-ranked whitespace tokens after the special block; ties are lexicographic.
inline Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_vocab, std::size_t min_freq) {
  if (corpus.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
  require(max_vocab >= 1 && min_freq >= 1, "max_vocab and min_freq must be positive");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& text : corpus)
    for (auto& w : split_whitespace(text)) ++freq[w];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : freq) {
    bool clashes = false;
    for (auto* name : special::kNames) clashes |= (w == name);
    if (c >= min_freq && !clashes) ranked.emplace_back(w, c);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  if (ranked.size() > max_vocab) ranked.resize(max_vocab);
  std::vector<std::string> tokens(special::kNames, special::kNames + special::kCount);
  for (auto& [w, _] : ranked) tokens.push_back(w);
  return Vocab::from_tokens(tokens);
}

/// [CLS] tokens [SEP], truncated to keep both markers, padded to max_len.
inline TokenizedInput encode_text(const std::string& text, const Vocab& v, std::size_t max_len) {
  if (max_len < 3) throw InputError("max_len must be at least 3, got " + std::to_string(max_len));
  TokenizedInput out;
  out.input_ids.reserve(max_len);
  out.input_ids.push_back(special::kCls);
  const auto words = split_whitespace(text);
  const std::size_t room = max_len - 2;
  for (std::size_t i = 0; i < words.size() && i < room; ++i) out.input_ids.push_back(v.id_of(words[i]));
  out.input_ids.push_back(special::kSep);
  out.true_length = out.input_ids.size();
  out.input_ids.resize(max_len, special::kPad);
  out.attention_mask.assign(max_len, 0);
  std::fill_n(out.attention_mask.begin(), out.true_length, std::uint8_t{1});
  out.segment_ids.assign(max_len, 0);
  return out;
}

inline std::string decode_ids(const std::vector<TokenId>& ids, const Vocab& v) {
  std::vector<std::string> words;
  for (TokenId id : ids) {
    const auto& tok = v.token_of(id);
    if (!is_special(id)) words.push_back(tok);
  }
  return join_words(words);
}

inline void save_vocab(const Vocab& v, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write token vocabulary '" + path.string() + "'");
  for (const auto& t : v.tokens()) out << t << '\n';
}

inline Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open token vocabulary '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocab::from_tokens(tokens);
}

}  // namespace mltc
