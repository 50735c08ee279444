#pragma once

// Multi-label evaluation: per-label confusion counts, binary accuracy over all
// example x label slots, macro precision/recall, macro F1 as the harmonic mean
// of macro P and macro R, micro F1 from pooled counts, and Gaussian smoothing
// of training curves for reports.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "mltc/error.hpp"
#include "mltc/labelprep.hpp"
#include "mltc/model/objectives.hpp"
#include "mltc/tokenizer.hpp"
#include "mltc/train/loss.hpp"

namespace mltc {

struct Counts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Counts&) const = default;
};

struct ConfusionCounts {
  std::vector<Counts> per_label;
  Counts aggregate;
};

struct LabelScores {
  std::string label;
  Counts counts;
  double precision = 0, recall = 0, f1 = 0;
};

struct MetricsReport {
  std::size_t examples = 0;
  double binary_accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;             // harmonic mean of macro P and macro R (headline)
  double macro_f1_label_mean = 0;  // unweighted mean of per-label F1
  double micro_f1 = 0;
  double bce_loss = 0;
  double decision_threshold = 0.5;
  std::vector<LabelScores> per_label;
};

/// A tokenized example with its binary label targets.
struct Example {
  TokenizedInput input;
  LabelVector target;
};

inline ConfusionCounts confusion(std::span<const LabelVector> preds, std::span<const LabelVector> targets) {
  if (preds.size() != targets.size())
    throw InputError("confusion: " + std::to_string(preds.size()) + " prediction rows vs " +
                     std::to_string(targets.size()) + " target rows");
  ConfusionCounts c;
  const std::size_t width = targets.empty() ? 0 : targets.front().size();
  c.per_label.resize(width);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != width || targets[i].size() != width)
      throw InputError("confusion: row " + std::to_string(i) + " has the wrong number of labels");
    for (std::size_t j = 0; j < width; ++j) {
      const bool p = preds[i][j] != 0, t = targets[i][j] != 0;
      Counts& k = c.per_label[j];
      if (p && t) ++k.tp;
      else if (p) ++k.fp;
      else if (t) ++k.fn;
      else ++k.tn;
    }
  }
  for (const auto& k : c.per_label) {
    c.aggregate.tp += k.tp;
    c.aggregate.fp += k.fp;
    c.aggregate.tn += k.tn;
    c.aggregate.fn += k.fn;
  }
  return c;
}

inline double binary_accuracy(const ConfusionCounts& c) {
  const auto& a = c.aggregate;
  if (a.total() == 0) throw InputError("binary_accuracy: no evaluated slots");
  return static_cast<double>(a.tn + a.tp) / static_cast<double>(a.tn + a.tp + a.fn + a.fp);
}

namespace detail {
inline double ratio_or_zero(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
inline double harmonic(double a, double b) { return a + b > 0 ? 2.0 * a * b / (a + b) : 0.0; }
}  // namespace detail

/// Unweighted means of per-label precision and recall; a zero denominator counts as 0.
inline std::pair<double, double> macro_precision_recall(const ConfusionCounts& c) {
  if (c.per_label.empty()) return {0.0, 0.0};
  double p = 0, r = 0;
  for (const auto& k : c.per_label) {
    p += detail::ratio_or_zero(k.tp, k.tp + k.fp);
    r += detail::ratio_or_zero(k.tp, k.tp + k.fn);
  }
  const auto n = static_cast<double>(c.per_label.size());
  return {p / n, r / n};
}

inline double macro_f1(double macro_precision, double macro_recall) {
  return detail::harmonic(macro_precision, macro_recall);
}

inline double micro_f1(const ConfusionCounts& c) {
  const auto& a = c.aggregate;
  const double den = static_cast<double>(a.tp) + 0.5 * static_cast<double>(a.fp + a.fn);
  return den > 0 ? static_cast<double>(a.tp) / den : 0.0;
}

inline double mean_label_f1(const ConfusionCounts& c) {
  if (c.per_label.empty()) return 0.0;
  double s = 0;
  for (const auto& k : c.per_label)
    s += detail::harmonic(detail::ratio_or_zero(k.tp, k.tp + k.fp), detail::ratio_or_zero(k.tp, k.tp + k.fn));
  return s / static_cast<double>(c.per_label.size());
}

inline MetricsReport make_report(const ConfusionCounts& c, const LabelVocabulary& labels, double threshold) {
  if (c.per_label.size() != labels.size()) throw InputError("confusion width does not match label vocabulary");
  MetricsReport r;
  r.decision_threshold = threshold;
  r.binary_accuracy = binary_accuracy(c);
  std::tie(r.macro_precision, r.macro_recall) = macro_precision_recall(c);
  r.macro_f1 = macro_f1(r.macro_precision, r.macro_recall);
  r.macro_f1_label_mean = mean_label_f1(c);
  r.micro_f1 = micro_f1(c);
  for (std::size_t j = 0; j < c.per_label.size(); ++j) {
    const Counts& k = c.per_label[j];
    LabelScores s{labels.labels()[j], k, detail::ratio_or_zero(k.tp, k.tp + k.fp),
                  detail::ratio_or_zero(k.tp, k.tp + k.fn), 0.0};
    s.f1 = detail::harmonic(s.precision, s.recall);
    r.per_label.push_back(std::move(s));
  }
  return r;
}

inline LabelVector threshold_probs(std::span<const double> probs, double threshold) {
  LabelVector out(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) out[j] = probs[j] >= threshold ? 1 : 0;
  return out;
}

/// Classifies every example and scores predictions (prob >= threshold) against targets.
inline MetricsReport evaluate(const Parameters& params, std::span<const Example> data, const LabelVocabulary& labels,
                              double threshold = 0.5) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InputError("decision threshold must lie in (0, 1)");
  std::vector<LabelVector> preds, targets;
  Matrix probs(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto p = classify(params, data[i].input);
    if (p.size() != labels.size()) throw InputError("model head width does not match label vocabulary");
    for (std::size_t j = 0; j < p.size(); ++j) probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[j];
    preds.push_back(threshold_probs(p, threshold));
    targets.push_back(data[i].target);
  }
  MetricsReport r = make_report(confusion(preds, targets), labels, threshold);
  r.examples = data.size();
  r.bce_loss = bce_loss(probs, targets).loss;
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.per_label)
    per.push_back({{"label", s.label},
                   {"tp", s.counts.tp},
                   {"fp", s.counts.fp},
                   {"tn", s.counts.tn},
                   {"fn", s.counts.fn},
                   {"precision", s.precision},
                   {"recall", s.recall},
                   {"f1", s.f1}});
  return {{"examples", r.examples},
          {"decision_threshold", r.decision_threshold},
          {"binary_accuracy", r.binary_accuracy},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f1", r.macro_f1},
          {"macro_f1_label_mean", r.macro_f1_label_mean},
          {"micro_f1", r.micro_f1},
          {"bce_loss", r.bce_loss},
          {"per_label", per}};
}

inline void write_per_label_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "label,tp,fp,tn,fn,precision,recall,f1\n";
  for (const auto& s : r.per_label)
    out << detail::csv_quote(s.label) << ',' << s.counts.tp << ',' << s.counts.fp << ',' << s.counts.tn << ','
        << s.counts.fn << ',' << s.precision << ',' << s.recall << ',' << s.f1 << '\n';
}

// ---- curve smoothing -------------------------------------------------------

/// Normalized Gaussian kernel of radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InputError("smoothing sigma must be > 0");
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (long i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Discrete Gaussian convolution; out-of-range samples mirror about the edges
/// (d c b a | a b c d | d c b a).
inline std::vector<double> smooth_curve(std::span<const double> values, double sigma) {
  if (values.empty()) throw InputError("cannot smooth an empty sequence");
  const auto kernel = gaussian_kernel(sigma);
  const long radius = static_cast<long>(kernel.size() / 2);
  const long n = static_cast<long>(values.size());
  auto reflect = [n](long i) {
    const long period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  std::vector<double> out(values.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0;
    for (long k = -radius; k <= radius; ++k)
      acc += kernel[static_cast<std::size_t>(k + radius)] * values[static_cast<std::size_t>(reflect(i + k))];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace mltc
