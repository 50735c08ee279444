#include <gtest/gtest.h>

#include <map>
#include <random>

#include "mltc/corpus.hpp"
#include "mltc/textprep.hpp"
#include "mltc/tokenizer.hpp"
#include "test_support.hpp"

using namespace mltc;

TEST(BuildVocab, FrequencyOrderAfterSpecials) {
  Vocab v = build_vocab({"a a b"}, 100, 1);
  ASSERT_EQ(v.size(), 7u);
  EXPECT_EQ(v.id_of("[PAD]"), 0);
  EXPECT_EQ(v.id_of("[UNK]"), 1);
  EXPECT_EQ(v.id_of("[CLS]"), 2);
  EXPECT_EQ(v.id_of("[SEP]"), 3);
  EXPECT_EQ(v.id_of("[MASK]"), 4);
  EXPECT_EQ(v.id_of("a"), 5);
  EXPECT_EQ(v.id_of("b"), 6);
}

TEST(BuildVocab, MinFreqCutoff) {
  Vocab v = build_vocab({"a a b"}, 100, 2);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.id_of("a"), 5);
  EXPECT_EQ(v.id_of("b"), special::kUnk);
}

TEST(BuildVocab, FixtureMatchesCountingOracle) {
  Dataset d = load_dataset(MLTC_FIXTURE, Format::jsonl);
  std::vector<std::string> texts;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : d.records) {
    texts.push_back(preprocess(r.text, {}));
    std::string word;
    for (char c : texts.back() + " ") {
      if (c == ' ') {
        if (!word.empty()) counts[word]++;
        word.clear();
      } else {
        word += c;
      }
    }
  }
  Vocab v = build_vocab(texts, 1000, 2);
  std::vector<std::pair<std::string, std::size_t>> expected;
  for (const auto& [w, c] : counts)
    if (c >= 2) expected.emplace_back(w, c);
  std::stable_sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  ASSERT_EQ(v.size(), expected.size() + special::kCount);
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_EQ(v.token_of(static_cast<TokenId>(i + special::kCount)), expected[i].first);
  Vocab capped = build_vocab(texts, 7, 1);
  EXPECT_EQ(capped.size(), 12u);
}

TEST(Encode, PadsAndMasks) {
  Vocab v = build_vocab({"a b"}, 100, 1);
  TokenizedInput t = encode_text("a b", v, 6);
  EXPECT_EQ(t.input_ids, (std::vector<TokenId>{special::kCls, v.id_of("a"), v.id_of("b"), special::kSep,
                                               special::kPad, special::kPad}));
  EXPECT_EQ(t.attention_mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0}));
  EXPECT_EQ(t.true_length, 4u);
  EXPECT_EQ(t.segment_ids, std::vector<std::uint8_t>(6, 0));
}

TEST(Encode, TruncatesKeepingSep) {
  std::string text;
  for (int i = 0; i < 600; ++i) text += "w" + std::to_string(i % 50) + " ";
  Vocab v = build_vocab({text}, 1000, 1);
  TokenizedInput t = encode_text(text, v, 512);
  EXPECT_EQ(t.true_length, 512u);
  EXPECT_EQ(t.input_ids.size(), 512u);
  EXPECT_EQ(t.input_ids.back(), special::kSep);
  EXPECT_THROW(encode_text("a", v, 2), InputError);
}

TEST(Encode, UnknownWordBecomesUnk) {
  Vocab v = build_vocab({"known words only"}, 100, 1);
  TokenizedInput t = encode_text("known mystery words", v, 8);
  EXPECT_EQ(t.input_ids[2], special::kUnk);
  EXPECT_EQ(t.input_ids[1], v.id_of("known"));
}

TEST(Decode, SkipsSpecials) {
  Vocab v = build_vocab({"water the plant"}, 100, 1);
  EXPECT_EQ(decode_ids(encode_text("water the plant", v, 10).input_ids, v), "water the plant");
  EXPECT_EQ(decode_ids(std::vector<TokenId>(8, special::kPad), v), "");
  EXPECT_THROW(decode_ids({999}, v), InputError);
}

TEST(Decode, RandomRoundTrips) {
  std::vector<std::string> words;
  for (int i = 0; i < 40; ++i) words.push_back("tok" + std::to_string(i));
  std::string all;
  for (auto& w : words) all += w + " ";
  Vocab v = build_vocab({all}, 1000, 1);
  std::mt19937_64 rng(17);
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::string> s;
    for (std::size_t i = 0, n = 1 + rng() % 20; i < n; ++i) s.push_back(words[rng() % words.size()]);
    const std::string text = join_words(s);
    EXPECT_EQ(decode_ids(encode_text(text, v, 32).input_ids, v), text);
  }
}

TEST(VocabFile, RoundTrip) {
  auto dir = scratch_dir("vocab_file");
  Vocab v = build_vocab({"b a c a"}, 100, 1);
  save_vocab(v, dir / "vocab.txt");
  EXPECT_EQ(load_vocab(dir / "vocab.txt"), v);
  write_file(dir / "bad.txt", "hello\n");
  EXPECT_THROW(load_vocab(dir / "bad.txt"), InputError);
}
