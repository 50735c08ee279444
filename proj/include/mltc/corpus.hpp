#pragma once

// Multi-label instruction datasets: records, jsonl/csv interchange, splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mltc/error.hpp"

namespace mltc {

struct Record {
  std::string id;
  std::string text;
  std::set<std::string> labels;

  bool operator==(const Record&) const = default;
};

struct Dataset {
  std::vector<Record> records;
  std::map<std::string, std::string> source_meta;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

enum class Format { jsonl, csv };

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

inline Format parse_format(const std::string& name) {
  if (name == "jsonl") return Format::jsonl;
  if (name == "csv") return Format::csv;
  throw InputError("unknown dataset format '" + name + "' (expected jsonl or csv)");
}

/// Picks the format from the file extension; anything but .csv is jsonl.
inline Format format_for_path(const std::filesystem::path& p) {
  return p.extension() == ".csv" ? Format::csv : Format::jsonl;
}

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// RFC 4180 reader: returns rows of fields, each tagged with the line it starts on.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv_rows(std::istream& in) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1, row_line = 1;
  auto end_row = [&] {
    row.push_back(field);
    field.clear();
    bool blank = row.size() == 1 && row[0].empty() && !field_started;
    if (!blank) rows.emplace_back(row_line, row);
    row.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(field);
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw InputError("csv: unterminated quoted field starting on line " + std::to_string(row_line));
  if (!field.empty() || !row.empty() || field_started) end_row();
  return rows;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

inline Record make_record(std::string id, std::string text, const std::vector<std::string>& labels,
                          const std::string& where) {
  Record r;
  r.id = std::move(id);
  r.text = std::move(text);
  if (r.id.empty()) throw InputError(where + ": empty id");
  if (trim(r.text).empty()) throw InputError(where + ": text is empty");
  for (const auto& l : labels) {
    auto t = trim(l);
    if (!t.empty()) r.labels.insert(t);
  }
  if (r.labels.empty()) throw InputError(where + ": empty label list");
  return r;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& path, Format format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset '" + path.string() + "'");
  Dataset d;
  d.source_meta["path"] = path.filename().string();
  d.source_meta["format"] = format == Format::jsonl ? "jsonl" : "csv";
  std::unordered_set<std::string> seen;
  auto add = [&](Record r, const std::string& where) {
    if (!seen.insert(r.id).second) throw InputError(where + ": duplicate id '" + r.id + "'");
    d.records.push_back(std::move(r));
  };

  if (format == Format::jsonl) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      const std::string where = path.filename().string() + " row " + std::to_string(lineno);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw InputError(where + ": malformed json (" + e.what() + ")");
      }
      if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j.contains("labels"))
        throw InputError(where + ": missing one of the required fields id, text, labels");
      if (!j["text"].is_string() || !j["labels"].is_array())
        throw InputError(where + ": text must be a string and labels an array");
      std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      std::vector<std::string> labels;
      for (const auto& l : j["labels"]) {
        if (!l.is_string()) throw InputError(where + ": labels must be strings");
        labels.push_back(l.get<std::string>());
      }
      add(detail::make_record(std::move(id), j["text"].get<std::string>(), labels, where), where);
    }
    return d;
  }

  auto rows = detail::read_csv_rows(in);
  if (rows.empty()) throw InputError(path.string() + ": csv has no header row");
  const auto& header = rows.front().second;
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError(path.string() + ": csv header lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ci = col("id"), ct = col("text"), cl = col("labels");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [lineno, fields] = rows[r];
    const std::string where = path.filename().string() + " row " + std::to_string(lineno);
    if (fields.size() != header.size())
      throw InputError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    add(detail::make_record(fields[ci], fields[ct], detail::split_on(fields[cl], '|'), where), where);
  }
  return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path, Format format) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset '" + path.string() + "'");
  if (format == Format::jsonl) {
    for (const auto& r : d.records) {
      nlohmann::json j;
      j["id"] = r.id;
      j["text"] = r.text;
      j["labels"] = std::vector<std::string>(r.labels.begin(), r.labels.end());
      out << j.dump() << '\n';
    }
    return;
  }
  out << "id,text,labels\n";
  for (const auto& r : d.records) {
    std::string joined;
    for (const auto& l : r.labels) {
      if (l.find('|') != std::string::npos)
        throw InputError("label '" + l + "' contains '|' and cannot be written as csv");
      if (!joined.empty()) joined += '|';
      joined += l;
    }
    out << detail::csv_quote(r.id) << ',' << detail::csv_quote(r.text) << ',' << detail::csv_quote(joined)
        << '\n';
  }
}

/// Uniform random split by record; each side keeps the input order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw InputError("train_fraction must lie strictly between 0 and 1");
  if (d.size() < 2) throw InputError("split needs at least 2 records");
  const std::size_t n = d.size();
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n)
    throw InputError("train_fraction " + std::to_string(spec.train_fraction) + " leaves one side of the split empty");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = 1;

  Dataset train, test;
  train.source_meta = test.source_meta = d.source_meta;
  train.source_meta["split"] = "train";
  test.source_meta["split"] = "test";
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).records.push_back(d.records[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace mltc
