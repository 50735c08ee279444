#pragma once

// Threshold-based label selection, relabeling, and binary label encoding.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mltc/corpus.hpp"
#include "mltc/error.hpp"

namespace mltc {

inline constexpr std::size_t kDefaultLabelThreshold = 500;

struct LabelStats {
  std::map<std::string, std::size_t> counts;
};

class LabelVocabulary {
 public:
  LabelVocabulary() = default;

  LabelVocabulary(std::vector<std::string> labels, std::size_t threshold)
      : labels_(std::move(labels)), threshold_(threshold) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], i).second) throw InputError("duplicate label '" + labels_[i] + "' in vocabulary");
    }
  }

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t threshold() const { return threshold_; }
  bool contains(const std::string& label) const { return index_.count(label) != 0; }

  std::size_t index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw InputError("label '" + label + "' is not in the vocabulary");
    return it->second;
  }

  bool operator==(const LabelVocabulary& o) const { return labels_ == o.labels_ && threshold_ == o.threshold_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t threshold_ = 0;
};

using LabelVector = std::vector<std::uint8_t>;

struct PreparedDataset {
  Dataset dataset;
  LabelVocabulary vocabulary;
  LabelStats stats;
  std::size_t removed_records = 0;
};

inline LabelStats count_labels(const Dataset& d) {
  if (d.empty()) throw InputError("cannot count labels of an empty dataset");
  LabelStats s;
  for (const auto& r : d.records)
    for (const auto& l : r.labels) ++s.counts[l];
  return s;
}

/// Keeps labels whose count/threshold score is at least 1, most frequent first,
/// ties in lexicographic order.
inline LabelVocabulary select_labels(const LabelStats& stats, std::size_t threshold) {
  if (threshold < 1) throw InputError("label threshold must be >= 1");
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [label, count] : stats.counts) {
    const double score = static_cast<double>(count) / static_cast<double>(threshold);
    if (score >= 1.0) kept.emplace_back(label, count);
  }
  if (kept.empty())
    throw InputError("no label reaches the threshold " + std::to_string(threshold) + "; vocabulary would be empty");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> names;
  names.reserve(kept.size());
  for (auto& [label, _] : kept) names.push_back(label);
  return LabelVocabulary(std::move(names), threshold);
}

/// Smallest threshold that keeps exactly the k most frequent labels, or more on ties at rank k.
inline std::size_t threshold_for_top_k(const LabelStats& stats, std::size_t k) {
  require(k >= 1, "top-k needs k >= 1");
  std::vector<std::size_t> counts;
  for (const auto& [_, c] : stats.counts) counts.push_back(c);
  std::sort(counts.begin(), counts.end(), std::greater<>());
  if (counts.empty()) throw InputError("no labels to rank");
  return counts[std::min(k, counts.size()) - 1];
}

inline Record filter_record_labels(const Record& r, const LabelVocabulary& v) {
  Record out{r.id, r.text, {}};
  for (const auto& l : r.labels)
    if (v.contains(l)) out.labels.insert(l);
  return out;
}

/// The k most frequent labels (ties lexicographic); threshold records the k-th count.
inline LabelVocabulary select_top_labels(const LabelStats& stats, std::size_t k) {
  require(k >= 1, "top-k label selection needs k >= 1");
  std::vector<std::pair<std::string, std::size_t>> ranked(stats.counts.begin(), stats.counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.empty()) throw InputError("no labels to rank");
  if (ranked.size() > k) ranked.resize(k);
  std::vector<std::string> names;
  for (auto& [label, _] : ranked) names.push_back(label);
  return LabelVocabulary(std::move(names), ranked.back().second);
}

/// Relabels every record against v and drops records left without labels.
inline PreparedDataset apply_vocabulary(const Dataset& d, const LabelVocabulary& v) {
  PreparedDataset p;
  p.stats = count_labels(d);
  p.vocabulary = v;
  p.dataset.source_meta = d.source_meta;
  for (const auto& r : d.records) {
    Record f = filter_record_labels(r, p.vocabulary);
    if (f.labels.empty()) {
      ++p.removed_records;
      continue;
    }
    p.dataset.records.push_back(std::move(f));
  }
  if (p.dataset.empty()) throw InputError("every record lost all of its labels");
  return p;
}

/// Count labels, keep those reaching the threshold, relabel, drop unlabeled records.
inline PreparedDataset prepare_dataset(const Dataset& d, std::size_t threshold) {
  return apply_vocabulary(d, select_labels(count_labels(d), threshold));
}

inline LabelVector encode_labels(const std::set<std::string>& labels, const LabelVocabulary& v) {
  LabelVector bits(v.size(), 0);
  for (const auto& l : labels) bits[v.index_of(l)] = 1;
  return bits;
}

inline std::set<std::string> decode_labels(const LabelVector& bits, const LabelVocabulary& v) {
  if (bits.size() != v.size())
    throw InputError("label vector has length " + std::to_string(bits.size()) + ", vocabulary has " +
                     std::to_string(v.size()));
  std::set<std::string> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw InputError("label vector entries must be 0 or 1");
    if (bits[i]) out.insert(v.labels()[i]);
  }
  return out;
}

// Vocabulary file: "# threshold=<n>" then one label per line in index order.
inline void save_label_vocabulary(const LabelVocabulary& v, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write label vocabulary '" + path.string() + "'");
  out << "# threshold=" << v.threshold() << '\n';
  for (const auto& l : v.labels()) out << l << '\n';
}

inline LabelVocabulary load_label_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open label vocabulary '" + path.string() + "'");
  std::string line;
  std::size_t threshold = 0;
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# threshold=", 0) == 0) {
      threshold = std::stoul(line.substr(12));
      continue;
    }
    if (line.empty()) continue;
    labels.push_back(line);
  }
  if (labels.empty()) throw InputError("label vocabulary '" + path.string() + "' is empty");
  return LabelVocabulary(std::move(labels), threshold);
}

}  // namespace mltc
