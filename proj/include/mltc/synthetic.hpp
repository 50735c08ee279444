#pragma once

// Deterministic how-to style corpus with skewed multi-label topics. Each label
// owns a small set of topic words; a record mixes words of its labels with
// generic filler and a little cross-topic noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "mltc/corpus.hpp"
#include "mltc/error.hpp"

namespace mltc {

struct SyntheticSpec {
  std::size_t records = 1000;
  std::size_t labels = 20;
  double zipf_exponent = 1.0;       // label prior ~ 1 / rank^s
  double second_label_prob = 0.35;  // chance of a second, distinct label
  std::size_t min_words = 20;
  std::size_t max_words = 40;
  double topic_rate = 0.35;  // fraction of words drawn from the record's own topics
  double noise_rate = 0.05;  // fraction drawn from an unrelated topic
  std::uint64_t seed = 1;
};

namespace detail {

struct Topic {
  const char* name;
  std::array<const char*, 8> words;
};

inline const std::vector<Topic>& named_topics() {
  static const std::vector<Topic> t = {
      {"Health", {"doctor", "symptom", "vitamin", "exercise", "sleep", "diet", "pain", "fever"}},
      {"Home and Garden", {"kitchen", "furniture", "paint", "carpet", "shelf", "curtain", "drawer", "ceiling"}},
      {"Pets and Animals", {"leash", "collar", "kennel", "veterinarian", "litter", "aquarium", "treat", "fur"}},
      {"Food and Entertaining", {"oven", "recipe", "flour", "sauce", "dinner", "garlic", "butter", "guest"}},
      {"Finance and Business", {"budget", "invoice", "loan", "tax", "savings", "credit", "salary", "stock"}},
      {"Computers and Electronics", {"laptop", "keyboard", "software", "router", "battery", "screen", "cable", "printer"}},
      {"Personal Care and Style", {"shampoo", "makeup", "lotion", "nail", "haircut", "perfume", "outfit", "skin"}},
      {"Hobbies and Crafts", {"yarn", "knit", "glue", "scissors", "bead", "sketch", "canvas", "origami"}},
      {"Sports and Fitness", {"stretch", "jog", "muscle", "coach", "ball", "swim", "racket", "workout"}},
      {"Travel", {"passport", "luggage", "flight", "hotel", "map", "ticket", "airport", "visa"}},
      {"Cars and Vehicles", {"engine", "tire", "brake", "oil", "windshield", "clutch", "gear", "mileage"}},
      {"Education and Communications", {"essay", "lecture", "grammar", "exam", "teacher", "notebook", "speech", "homework"}},
  };
  return t;
}

inline std::string pseudo_word(std::mt19937_64& rng) {
  static const std::array<const char*, 12> syllables = {"ka", "lo", "mi", "ren", "tu", "vax",
                                                        "zel", "pra", "dun", "sio", "bre", "gof"};
  std::uniform_int_distribution<std::size_t> pick(0, syllables.size() - 1);
  std::string w;
  for (int i = 0; i < 3; ++i) w += syllables[pick(rng)];
  return w;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> f = {
      "how", "to", "the", "a", "your", "make", "sure", "you", "use", "step", "first", "then", "carefully",
      "try", "keep", "good", "small", "place", "time", "need", "it", "and", "with", "for", "before",
      "after", "simple", "easy", "quick", "way", "help", "start", "check", "find", "get", "this",
      "some", "few", "every", "day", "hand", "water", "thing", "best", "right", "again", "until", "done"};
  return f;
}

}  // namespace detail

/// Label names and topic vocabularies for n labels (named topics first, then generated ones).
inline std::vector<std::pair<std::string, std::vector<std::string>>> synthetic_topics(std::size_t n,
                                                                                   std::uint64_t seed) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  const auto& named = detail::named_topics();
  std::mt19937_64 rng(seed ^ 0x70b1c5ULL);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < named.size()) {
      out.emplace_back(named[i].name, std::vector<std::string>(named[i].words.begin(), named[i].words.end()));
    } else {
      std::vector<std::string> words;
      for (int k = 0; k < 8; ++k) words.push_back(detail::pseudo_word(rng));
      out.emplace_back("Topic " + std::to_string(i + 1), std::move(words));
    }
  }
  return out;
}

inline Dataset make_synthetic_corpus(const SyntheticSpec& spec) {
  require(spec.records >= 1 && spec.labels >= 1, "synthetic corpus needs records >= 1 and labels >= 1");
  require(spec.min_words >= 1 && spec.min_words <= spec.max_words, "synthetic corpus needs 1 <= min_words <= max_words");
  require(spec.topic_rate >= 0 && spec.noise_rate >= 0 && spec.topic_rate + spec.noise_rate <= 1,
          "synthetic corpus word rates must be non-negative and sum to at most 1");
  const auto topics = synthetic_topics(spec.labels, spec.seed);
  std::vector<double> prior(spec.labels);
  for (std::size_t i = 0; i < spec.labels; ++i) prior[i] = 1.0 / std::pow(static_cast<double>(i + 1), spec.zipf_exponent);

  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<std::size_t> label_dist(prior.begin(), prior.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> length(spec.min_words, spec.max_words);
  std::uniform_int_distribution<std::size_t> any_label(0, spec.labels - 1);
  std::uniform_int_distribution<std::size_t> topic_word(0, 7);
  const auto& filler = detail::filler_words();
  std::uniform_int_distribution<std::size_t> filler_word(0, filler.size() - 1);

  Dataset d;
  d.source_meta["generator"] = "synthetic";
  d.source_meta["seed"] = std::to_string(spec.seed);
  for (std::size_t r = 0; r < spec.records; ++r) {
    std::vector<std::size_t> own{label_dist(rng)};
    if (spec.labels > 1 && u(rng) < spec.second_label_prob) {
      std::size_t second = label_dist(rng);
      while (second == own[0]) second = label_dist(rng);
      own.push_back(second);
    }
    std::string text;
    const std::size_t n = length(rng);
    for (std::size_t w = 0; w < n; ++w) {
      const double x = u(rng);
      std::string word;
      if (x < spec.topic_rate) {
        std::uniform_int_distribution<std::size_t> which(0, own.size() - 1);
        word = topics[own[which(rng)]].second[topic_word(rng)];
      } else if (x < spec.topic_rate + spec.noise_rate) {
        word = topics[any_label(rng)].second[topic_word(rng)];
      } else {
        word = filler[filler_word(rng)];
      }
      if (!text.empty()) text += ' ';
      text += word;
    }
    Record rec;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", r + 1);
    rec.id = id;
    rec.text = std::move(text);
    for (std::size_t l : own) rec.labels.insert(topics[l].first);
    d.records.push_back(std::move(rec));
  }
  return d;
}

}  // namespace mltc
