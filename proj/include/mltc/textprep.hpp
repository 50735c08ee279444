#pragma once

// Deterministic text normalization: special-character removal, lowercasing,
// stopword removal and a rule-based lemmatizer.

#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mltc/error.hpp"

namespace mltc {

struct PreprocessConfig {
  bool remove_special = true;
  bool remove_stopwords = true;
  bool lemmatize = true;
  bool lowercase = true;
  std::string stopword_list_id = "english-v1";

  bool any_enabled() const { return remove_special || remove_stopwords || lemmatize || lowercase; }
};

namespace detail {

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// clang-format off
// english-v1: the common NLTK English list (179 entries). Do not edit; add a new id instead.
inline const std::unordered_set<std::string>& english_v1_stopwords() {
  static const std::unordered_set<std::string> words = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll",
    "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's",
    "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "that'll", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does",
    "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
    "of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
    "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
    "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
    "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "don't", "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "aren't", "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
    "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't",
    "needn", "needn't", "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren",
    "weren't", "won", "won't", "wouldn", "wouldn't",
  };
  return words;
}

inline const std::unordered_map<std::string, std::string>& irregular_lemmas() {
  static const std::unordered_map<std::string, std::string> m = {
    {"given", "give"}, {"gave", "give"}, {"went", "go"}, {"gone", "go"}, {"goes", "go"},
    {"took", "take"}, {"taken", "take"}, {"made", "make"}, {"came", "come"}, {"done", "do"},
    {"got", "get"}, {"gotten", "get"}, {"kept", "keep"}, {"left", "leave"}, {"felt", "feel"},
    {"found", "find"}, {"told", "tell"}, {"said", "say"}, {"paid", "pay"}, {"laid", "lay"},
    {"bought", "buy"}, {"brought", "bring"}, {"thought", "think"}, {"taught", "teach"},
    {"caught", "catch"}, {"sought", "seek"}, {"fought", "fight"}, {"built", "build"},
    {"sent", "send"}, {"spent", "spend"}, {"lent", "lend"}, {"held", "hold"}, {"sold", "sell"},
    {"stood", "stand"}, {"understood", "understand"}, {"wrote", "write"}, {"written", "write"},
    {"ate", "eat"}, {"eaten", "eat"}, {"drank", "drink"}, {"drunk", "drink"}, {"began", "begin"},
    {"begun", "begin"}, {"knew", "know"}, {"known", "know"}, {"grew", "grow"}, {"grown", "grow"},
    {"drew", "draw"}, {"drawn", "draw"}, {"threw", "throw"}, {"thrown", "throw"}, {"flew", "fly"},
    {"shown", "show"}, {"seen", "see"}, {"saw", "see"}, {"chosen", "choose"}, {"chose", "choose"},
    {"broke", "break"}, {"broken", "break"}, {"spoke", "speak"}, {"spoken", "speak"},
    {"froze", "freeze"}, {"frozen", "freeze"}, {"fell", "fall"}, {"fallen", "fall"},
    {"ran", "run"}, {"sat", "sit"}, {"met", "meet"}, {"led", "lead"}, {"fed", "feed"},
    {"slept", "sleep"}, {"swept", "sweep"}, {"lost", "lose"}, {"meant", "mean"}, {"heard", "hear"},
    {"children", "child"}, {"men", "man"}, {"women", "woman"}, {"feet", "foot"}, {"teeth", "tooth"},
    {"mice", "mouse"}, {"geese", "goose"}, {"people", "person"}, {"leaves", "leaf"},
    {"knives", "knife"}, {"wives", "wife"}, {"lives", "life"}, {"halves", "half"},
    {"shelves", "shelf"}, {"wolves", "wolf"}, {"loaves", "loaf"}, {"calves", "calf"},
    {"better", "good"}, {"best", "good"}, {"worse", "bad"}, {"worst", "bad"},
    {"freed", "free"}, {"buses", "bus"}, {"shoes", "shoe"}, {"toes", "toe"}, {"canoes", "canoe"},
  };
  return m;
}

// Words whose endings look inflectional but are not.
inline const std::unordered_set<std::string>& uninflected_words() {
  static const std::unordered_set<std::string> s = {
    "news", "series", "species", "always", "perhaps", "lens", "thus", "physics", "mathematics",
    "politics", "economics", "athletics", "gymnastics", "diabetes", "measles", "mumps", "arthritis",
    "during", "morning", "evening", "nothing", "something", "anything", "everything", "ceiling",
    "wedding", "pudding", "stuffing", "icing", "awning", "herring", "sibling", "pending",
    "hundred", "naked", "wicked", "sacred", "kindred", "hatred", "indeed", "succeed", "proceed",
    "exceed", "embed", "tweed", "bleed", "steed", "greed",
  };
  return s;
}

// Base forms ending in a silent e whose -ed/-ing stems the suffix rules cannot restore.
inline const std::unordered_set<std::string>& e_final_bases() {
  static const std::unordered_set<std::string> s = {
    "use", "provide", "decide", "include", "remove", "improve", "receive", "require", "continue",
    "arrive", "believe", "describe", "divide", "involve", "serve", "cause", "change", "arrange",
    "charge", "judge", "manage", "damage", "produce", "reduce", "replace", "practice", "notice",
    "prepare", "compare", "measure", "leave", "solve", "become", "argue", "rescue", "value",
    "issue", "pursue", "glue", "sue", "tie", "lie", "die", "please", "release", "increase",
    "decrease", "purchase", "choose", "close", "raise", "rinse", "squeeze", "sneeze", "breathe",
    "bathe", "soothe", "massage", "encourage", "engage", "exchange", "challenge", "ensure",
    "ignore", "explore", "restore", "store", "score", "secure", "cure", "figure", "capture",
    "feature", "picture", "balance", "dance", "advance", "enhance", "force", "pierce", "source",
    "introduce", "observe", "preserve", "reserve", "deserve", "achieve", "relieve", "retrieve",
    "approve", "prove", "move", "love", "dissolve", "resolve", "combine", "define", "determine",
    "examine", "imagine", "shine", "decline", "operate", "create", "separate", "celebrate",
    "complete", "delete", "compete", "invite", "excite", "unite", "write", "bite", "type", "wipe",
    "pipe", "shape", "tape", "scrape", "escape", "hope", "cope", "rope", "smoke", "joke", "bake",
    "shake", "wake", "poke", "stroke", "like", "bike", "hike", "strike", "name", "blame", "frame",
    "come", "welcome", "assume", "consume", "resume", "tune", "prune", "phone", "stone", "tone",
    "rule", "schedule", "handle", "cycle", "settle", "struggle", "tackle", "juggle", "bundle",
    "pause", "refuse", "confuse", "excuse", "amuse", "abuse", "fuse", "accuse", "oppose",
    "propose", "suppose", "compose", "dispose", "expose", "impose", "pose", "rise", "surprise",
    "advise", "revise", "supervise", "exercise", "promise", "size", "freeze", "breeze",
  };
  return s;
}
// clang-format on

inline bool is_vowel_at(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return true;
    case 'y': return i > 0 && !is_vowel_at(w, i - 1);
    default: return false;
  }
}

// Number of vowel-consonant sequences in the [C](VC)^m[V] decomposition.
inline int measure(std::string_view w) {
  int m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    bool v = is_vowel_at(w, i);
    if (!v && prev_vowel) ++m;
    prev_vowel = v;
  }
  return m;
}

inline bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (is_vowel_at(w, i)) return true;
  return false;
}

inline bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

inline bool ends_double_consonant(std::string_view w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && !is_vowel_at(w, n - 1);
}

inline bool ends_cvc(std::string_view w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  const char last = w[n - 1];
  return !is_vowel_at(w, n - 3) && is_vowel_at(w, n - 2) && !is_vowel_at(w, n - 1) && last != 'w' &&
         last != 'x' && last != 'y';
}

inline bool all_lower_alpha(std::string_view w) {
  for (char c : w)
    if (c < 'a' || c > 'z') return false;
  return !w.empty();
}

// Fixes up a stem left after removing -ed/-ing.
inline std::string restore_stem(std::string stem) {
  if (e_final_bases().count(stem + "e")) return stem + "e";
  if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) return stem + "e";
  if (ends_double_consonant(stem)) {
    char c = stem.back();
    if (c != 'l' && c != 's' && c != 'z') stem.pop_back();
    return stem;
  }
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

inline std::string lemmatize_once(const std::string& w) {
  if (auto it = irregular_lemmas().find(w); it != irregular_lemmas().end()) return it->second;
  if (uninflected_words().count(w) || w.size() <= 3 || !all_lower_alpha(w)) return w;

  // Plurals and third person.
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  if (ends_with(w, "ies")) return w.size() > 4 ? w.substr(0, w.size() - 3) + "y" : w.substr(0, w.size() - 1);
  if (ends_with(w, "oes")) return w.substr(0, w.size() - 2);
  if (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "zzes"))
    return w.substr(0, w.size() - 2);
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is"))
    return w.substr(0, w.size() - 1);

  // Past tense and progressive.
  if (ends_with(w, "eed")) {
    std::string stem = w.substr(0, w.size() - 3);
    return measure(stem) > 0 ? stem + "ee" : w;
  }
  if (ends_with(w, "ied")) return w.size() > 4 ? w.substr(0, w.size() - 3) + "y" : w.substr(0, w.size() - 1);
  for (std::string_view suffix : {std::string_view("ed"), std::string_view("ing")}) {
    if (!ends_with(w, suffix)) continue;
    std::string stem = w.substr(0, w.size() - suffix.size());
    if (!has_vowel(stem)) return w;
    return restore_stem(std::move(stem));
  }
  return w;
}

}  // namespace detail

inline const std::unordered_set<std::string>& stopword_list(const std::string& id) {
  if (id == "english-v1") return detail::english_v1_stopwords();
  throw InputError("unknown stopword list '" + id + "'");
}

/// Every character outside letters, digits and whitespace becomes a space;
/// whitespace runs collapse to one space and the ends are trimmed.
inline std::string remove_special_chars(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (detail::is_ascii_alnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    } else {
      // Includes every byte of non-ASCII code points.
      pending_space = true;
    }
  }
  return out;
}

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (detail::is_ascii_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                                 const std::string& list_id = "english-v1") {
  const auto& stop = stopword_list(list_id);
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (!stop.count(t)) out.push_back(t);
  return out;
}

/// Maps a lowercase word to its lemma; repeated until nothing changes, so the
/// mapping is idempotent.
inline std::string lemmatize_word(const std::string& word) {
  std::string cur = word;
  for (int i = 0; i < 8; ++i) {
    std::string next = detail::lemmatize_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

inline std::vector<std::string> lemmatize(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lemmatize_word(t));
  return out;
}

/// Stage order: special characters, lowercase, whitespace split, stopwords,
/// lemmas, single-space join.
inline std::string preprocess(std::string_view text, const PreprocessConfig& cfg) {
  if (!cfg.any_enabled()) return std::string(text);
  std::string t = cfg.remove_special ? remove_special_chars(text) : std::string(text);
  if (cfg.lowercase) t = to_lower(t);
  std::vector<std::string> tokens = split_whitespace(t);
  if (cfg.remove_stopwords) {
    const auto& stop = stopword_list(cfg.stopword_list_id);
    std::vector<std::string> kept;
    for (auto& tok : tokens) {
      // A token whose lemma is a stopword goes too; otherwise a second pass would drop it.
      if (stop.count(tok) || (cfg.lemmatize && stop.count(lemmatize_word(tok)))) continue;
      kept.push_back(std::move(tok));
    }
    tokens = std::move(kept);
  }
  if (cfg.lemmatize) tokens = lemmatize(tokens);
  return join_words(tokens);
}

}  // namespace mltc
