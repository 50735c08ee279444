#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mltc/corpus.hpp"
#include "test_support.hpp"

using namespace mltc;

TEST(Corpus, JsonlKeepsFileOrder) {
  auto dir = scratch_dir("corpus_order");
  write_file(dir / "d.jsonl",
             "{\"id\":\"a\",\"text\":\"one\",\"labels\":[\"X\"]}\n"
             "{\"id\":\"b\",\"text\":\"two\",\"labels\":[\"Y\"]}\n"
             "{\"id\":\"c\",\"text\":\"three\",\"labels\":[\"X\",\"Y\"]}\n");
  Dataset d = load_dataset(dir / "d.jsonl", Format::jsonl);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.records[0].id, "a");
  EXPECT_EQ(d.records[1].id, "b");
  EXPECT_EQ(d.records[2].id, "c");
}

TEST(Corpus, RepeatedLabelCollapses) {
  auto dir = scratch_dir("corpus_dup_label");
  write_file(dir / "d.jsonl", "{\"id\":\"a\",\"text\":\"t\",\"labels\":[\"Health\",\"Health\"]}\n");
  Dataset d = load_dataset(dir / "d.jsonl", Format::jsonl);
  EXPECT_EQ(d.records[0].labels, (std::set<std::string>{"Health"}));
}

TEST(Corpus, FixtureHistogramMatchesHandCount) {
  Dataset d = load_dataset(MLTC_FIXTURE, Format::jsonl);
  ASSERT_EQ(d.size(), 60u);
  std::map<std::string, std::size_t> hist;
  for (const auto& r : d.records)
    for (const auto& l : r.labels) hist[l]++;
  const std::map<std::string, std::size_t> expected = {
      {"Health", 24},          {"Home and Garden", 18}, {"Pets and Animals", 14},
      {"Dog Training", 4},     {"Gardening", 4},        {"Cats", 3},
      {"Finance and Business", 3}, {"Recipes", 2},      {"Travel", 1}};
  EXPECT_EQ(hist, expected);
}

TEST(Corpus, CsvAndJsonlRoundTrip) {
  auto dir = scratch_dir("corpus_roundtrip");
  Dataset d;
  d.records.push_back({"r1", "plain text", {"A"}});
  d.records.push_back({"r2", "with, comma and \"quotes\"\nand a newline", {"A", "B"}});
  d.records.push_back({"r3", "x", {"Label With Spaces"}});
  for (Format f : {Format::jsonl, Format::csv}) {
    const auto path = dir / (f == Format::jsonl ? "d.jsonl" : "d.csv");
    save_dataset(d, path, f);
    Dataset back = load_dataset(path, f);
    EXPECT_EQ(back.records, d.records);
  }
}

TEST(Corpus, CsvErrorNamesRow) {
  auto dir = scratch_dir("corpus_bad_csv");
  write_file(dir / "d.csv", "id,text,labels\nr1,fine,A\nr2,too,many,fields\n");
  try {
    load_dataset(dir / "d.csv", Format::csv);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(Corpus, InputErrors) {
  auto dir = scratch_dir("corpus_errors");
  EXPECT_THROW(load_dataset(dir / "missing.jsonl", Format::jsonl), InputError);
  write_file(dir / "dup.jsonl",
             "{\"id\":\"a\",\"text\":\"t\",\"labels\":[\"X\"]}\n{\"id\":\"a\",\"text\":\"u\",\"labels\":[\"X\"]}\n");
  EXPECT_THROW(load_dataset(dir / "dup.jsonl", Format::jsonl), InputError);
  write_file(dir / "nolabel.jsonl", "{\"id\":\"a\",\"text\":\"t\",\"labels\":[]}\n");
  EXPECT_THROW(load_dataset(dir / "nolabel.jsonl", Format::jsonl), InputError);
  write_file(dir / "notext.jsonl", "{\"id\":\"a\",\"text\":\"   \",\"labels\":[\"X\"]}\n");
  EXPECT_THROW(load_dataset(dir / "notext.jsonl", Format::jsonl), InputError);
  write_file(dir / "broken.jsonl", "{\"id\":\"a\",\n");
  EXPECT_THROW(load_dataset(dir / "broken.jsonl", Format::jsonl), InputError);
  EXPECT_THROW(parse_format("xml"), InputError);
}

namespace {
Dataset numbered(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.records.push_back({"id" + std::to_string(i), "t", {"A"}});
  return d;
}
std::set<std::string> ids(const Dataset& d) {
  std::set<std::string> s;
  for (const auto& r : d.records) s.insert(r.id);
  return s;
}
}  // namespace

TEST(Split, TenRecordsAtPointEight) {
  auto [train, test] = split_dataset(numbered(10), {0.8, 3});
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
}

TEST(Split, SameSeedSamePartition) {
  Dataset d = load_dataset(MLTC_FIXTURE, Format::jsonl);
  auto a = split_dataset(d, {0.8, 11});
  auto b = split_dataset(d, {0.8, 11});
  EXPECT_EQ(a.first.records, b.first.records);
  EXPECT_EQ(a.second.records, b.second.records);
}

TEST(Split, DifferentSeedsDifferButCoverInput) {
  Dataset d = load_dataset(MLTC_FIXTURE, Format::jsonl);
  auto a = split_dataset(d, {0.8, 1});
  auto b = split_dataset(d, {0.8, 2});
  EXPECT_NE(ids(a.first), ids(b.first));
  for (const auto* s : {&a, &b}) {
    std::set<std::string> all = ids(s->first), te = ids(s->second);
    for (const auto& i : te) EXPECT_TRUE(all.insert(i).second) << "overlap on " << i;
    EXPECT_EQ(all, ids(d));
  }
}

TEST(Split, PropertiesOverManySeeds) {
  Dataset d = numbered(37);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto [train, test] = split_dataset(d, {0.7, seed});
    EXPECT_EQ(train.size(), 26u);
    EXPECT_EQ(train.size() + test.size(), d.size());
    std::set<std::string> u = ids(train);
    for (const auto& i : ids(test)) EXPECT_TRUE(u.insert(i).second);
    EXPECT_EQ(u, ids(d));
    // each side keeps input order
    for (const auto* side : {&train, &test})
      for (std::size_t i = 1; i < side->size(); ++i)
        EXPECT_LT(std::stoi(side->records[i - 1].id.substr(2)), std::stoi(side->records[i].id.substr(2)));
  }
}

TEST(Split, RejectsDegenerateRequests) {
  EXPECT_THROW(split_dataset(numbered(1), {0.8, 0}), InputError);
  EXPECT_THROW(split_dataset(numbered(10), {1.0, 0}), InputError);
  EXPECT_THROW(split_dataset(numbered(10), {0.0, 0}), InputError);
  EXPECT_THROW(split_dataset(numbered(3), {0.9, 0}), InputError);
}
