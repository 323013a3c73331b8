#include "ldss/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ldss/random.hpp"

namespace ldss {

namespace {

std::atomic<bool> g_warnings_muted{false};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view token) {
  return token.empty() || token == "?" || token == "NA";
}

std::optional<double> parse_number(std::string_view token) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void warn(std::string_view message) {
  if (!g_warnings_muted.load()) std::cerr << "warning: " << message << '\n';
}

void set_warnings_muted(bool muted) { g_warnings_muted.store(muted); }

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::categorical ? "categorical" : "numerical";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::injected: return "injected";
    case Provenance::recovery: return "recovery";
    case Provenance::trigger: return "trigger";
  }
  return "original";
}

std::size_t FeatureSchema::intern(std::string_view token) {
  if (auto i = find(token)) return *i;
  values.emplace_back(token);
  return values.size() - 1;
}

std::optional<std::size_t> FeatureSchema::find(std::string_view token) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == token) return i;
  }
  return std::nullopt;
}

std::size_t LabelSchema::intern(std::string_view token) {
  if (auto i = find(token)) return *i;
  classes.emplace_back(token);
  return classes.size() - 1;
}

std::optional<std::size_t> LabelSchema::find(std::string_view token) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == token) return i;
  }
  return std::nullopt;
}

namespace {

template <typename A>
bool prefix_compatible(const A& a, const A& b) {
  const std::size_t n = std::min(a.size(), b.size());
  return std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n), b.begin());
}

}  // namespace

bool Schema::compatible_with(const Schema& other) const {
  if (features.size() != other.features.size()) return false;
  if (label.name != other.label.name || label.task != other.label.task) return false;
  if (label_column != other.label_column) return false;
  if (!prefix_compatible(label.classes, other.label.classes)) return false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& a = features[i];
    const auto& b = other.features[i];
    if (a.name != b.name || a.kind != b.kind) return false;
    if (!prefix_compatible(a.values, b.values)) return false;
  }
  return true;
}

Schema parse_schema(const nlohmann::json& j) {
  const nlohmann::json* columns = &j;
  if (j.is_object()) {
    if (!j.contains("columns")) throw Error("schema: expected an array or an object with \"columns\"");
    columns = &j.at("columns");
  }
  if (!columns->is_array() || columns->empty()) throw Error("schema: no columns");

  Schema schema;
  bool have_label = false;
  std::size_t position = 0;
  for (const auto& col : *columns) {
    const std::string name = col.at("name").get<std::string>();
    const std::string kind = col.value("kind", std::string("numerical"));
    if (kind != "categorical" && kind != "numerical") {
      throw Error("schema: column '" + name + "' has unknown kind '" + kind + "'");
    }
    std::vector<std::string> values;
    if (col.contains("values")) {
      values = col.at("values").get<std::vector<std::string>>();
      if (values.empty()) throw Error("schema: column '" + name + "' declares empty values");
      std::vector<std::string> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error("schema: column '" + name + "' declares duplicate values");
      }
      if (kind == "numerical") throw Error("schema: numerical column '" + name + "' declares values");
    }
    if (col.value("label", false)) {
      if (have_label) throw Error("schema: more than one label column");
      have_label = true;
      schema.label.name = name;
      schema.label.task = kind == "categorical" ? TaskKind::classification : TaskKind::regression;
      schema.label.classes = values;
      schema.label.declared = !values.empty();
      schema.label_column = position;
    } else {
      FeatureSchema f;
      f.name = name;
      f.kind = kind == "categorical" ? FeatureKind::categorical : FeatureKind::numerical;
      f.values = values;
      f.declared = !values.empty();
      schema.features.push_back(std::move(f));
    }
    ++position;
  }
  if (!have_label) throw Error("schema: label column absent");
  if (schema.features.empty()) throw Error("schema: no feature columns");
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("schema: invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_schema(j);
}

nlohmann::json schema_to_json(const Schema& schema, bool include_vocabulary) {
  nlohmann::json cols = nlohmann::json::array();
  std::size_t f = 0;
  for (std::size_t c = 0; c < schema.column_count(); ++c) {
    nlohmann::json col;
    if (c == schema.label_column) {
      col["name"] = schema.label.name;
      col["kind"] = schema.label.task == TaskKind::classification ? "categorical" : "numerical";
      col["label"] = true;
      if (include_vocabulary && !schema.label.classes.empty()) col["values"] = schema.label.classes;
    } else {
      const auto& feat = schema.features[f++];
      col["name"] = feat.name;
      col["kind"] = std::string(to_string(feat.kind));
      if (feat.kind == FeatureKind::categorical && !feat.values.empty() &&
          (include_vocabulary || feat.declared)) {
        col["values"] = feat.values;
      }
    }
    cols.push_back(std::move(col));
  }
  return nlohmann::json{{"columns", cols}};
}

std::size_t TabularDataset::next_id() const {
  std::size_t next = 0;
  for (auto id : ids) next = std::max(next, id + 1);
  return next;
}

std::vector<std::size_t> TabularDataset::class_histogram() const {
  std::vector<std::size_t> h(class_count(), 0);
  for (std::size_t i = 0; i < size(); ++i) ++h[static_cast<std::size_t>(class_of(i))];
  return h;
}

std::size_t TabularDataset::count(Provenance p) const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p));
}

void TabularDataset::push_back(Row row, double label, Provenance p, std::optional<std::size_t> id) {
  const std::size_t assigned = id ? *id : next_id();
  rows.push_back(std::move(row));
  labels.push_back(label);
  provenance.push_back(p);
  ids.push_back(assigned);
}

TabularDataset TabularDataset::subset(const std::vector<std::size_t>& indices) const {
  TabularDataset out = empty_like();
  out.rows.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw Error("subset: index out of range");
    out.rows.push_back(rows[i]);
    out.labels.push_back(labels[i]);
    out.provenance.push_back(provenance[i]);
    out.ids.push_back(ids[i]);
  }
  return out;
}

TabularDataset TabularDataset::empty_like() const {
  TabularDataset out;
  out.schema = schema;
  return out;
}

void TabularDataset::validate() const {
  if (labels.size() != rows.size() || provenance.size() != rows.size() || ids.size() != rows.size()) {
    throw Error("dataset: column lengths disagree");
  }
  for (const auto& row : rows) {
    if (row.size() != dims()) throw Error("dataset: row width does not match schema");
    for (std::size_t f = 0; f < dims(); ++f) {
      const double v = row[f];
      if (!std::isfinite(v)) throw Error("dataset: non-finite cell in '" + schema.features[f].name + "'");
      if (schema.features[f].kind == FeatureKind::categorical) {
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(schema.features[f].values.size())) {
          throw Error("dataset: categorical cell out of vocabulary in '" + schema.features[f].name + "'");
        }
      }
    }
  }
  if (is_classification()) {
    for (double l : labels) {
      if (l < 0 || l != std::floor(l) || l >= static_cast<double>(class_count())) {
        throw Error("dataset: class label out of range");
      }
    }
  }
}

TabularDataset concat(const TabularDataset& a, const TabularDataset& b) {
  if (!a.schema.compatible_with(b.schema)) throw Error("concat: schema mismatch");
  TabularDataset out = a;
  for (std::size_t f = 0; f < out.schema.features.size(); ++f) {
    if (b.schema.features[f].values.size() > out.schema.features[f].values.size()) {
      out.schema.features[f].values = b.schema.features[f].values;
    }
  }
  if (b.schema.label.classes.size() > out.schema.label.classes.size()) {
    out.schema.label.classes = b.schema.label.classes;
  }
  out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  return out;
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool any = false;

  auto end_field = [&] {
    record.push_back(field_quoted ? field : std::string(trim(field)));
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    any = true;
    if (c == '"' && trim(field).empty()) {
      field.clear();
      in_quotes = true;
      field_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_record();
    } else if (!field_quoted) {
      field.push_back(c);
    }
  }
  if (in_quotes) throw Error("csv: unterminated quoted field");
  if (any || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double value) {
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_number: conversion failed");
  return std::string(buf, ptr);
}

std::string format_cell(const FeatureSchema& f, double value) {
  if (f.kind == FeatureKind::categorical) {
    const auto code = static_cast<std::size_t>(value);
    if (value < 0 || code >= f.values.size()) throw Error("format: category code out of range");
    return f.values[code];
  }
  return format_number(value);
}

std::string format_label(const LabelSchema& l, double value) {
  if (l.task == TaskKind::classification) {
    const auto code = static_cast<std::size_t>(value);
    if (value < 0 || code >= l.classes.size()) throw Error("format: class code out of range");
    return l.classes[code];
  }
  return format_number(value);
}

TabularDataset parse_csv(std::string_view text, Schema schema, const LoadOptions& options) {
  auto records = parse_csv_records(text);
  if (records.empty()) throw Error("csv: empty file");
  const auto& header = records.front();
  if (header.size() != schema.column_count()) {
    throw Error("csv: header has " + std::to_string(header.size()) + " columns, schema expects " +
                std::to_string(schema.column_count()));
  }
  // Map schema columns to header positions by name.
  std::vector<std::string> expected;
  {
    std::size_t f = 0;
    for (std::size_t c = 0; c < schema.column_count(); ++c) {
      expected.push_back(c == schema.label_column ? schema.label.name : schema.features[f++].name);
    }
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != expected[c]) {
      throw Error("csv: header column " + std::to_string(c) + " is '" + header[c] + "', schema expects '" +
                  expected[c] + "'");
    }
  }

  const std::size_t d = schema.dims();
  // Raw pass: parse or mark missing; categorical tokens interned on the fly.
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<double> labels;
  std::size_t dropped = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != schema.column_count()) {
      throw Error("csv: record " + std::to_string(r) + " has " + std::to_string(rec.size()) + " fields");
    }
    const std::string_view label_tok = trim(rec[schema.label_column]);
    if (is_missing(label_tok)) {
      ++dropped;
      continue;
    }
    double label = 0;
    if (schema.label.task == TaskKind::classification) {
      if (schema.label.declared && !schema.label.find(label_tok)) {
        throw Error("csv: label '" + std::string(label_tok) + "' not among declared classes");
      }
      label = static_cast<double>(schema.label.intern(label_tok));
    } else {
      auto v = parse_number(label_tok);
      if (!v) throw Error("csv: non-numeric target '" + std::string(label_tok) + "'");
      label = *v;
    }
    std::vector<std::optional<double>> row(d);
    std::size_t f = 0;
    for (std::size_t c = 0; c < rec.size(); ++c) {
      if (c == schema.label_column) continue;
      auto& feat = schema.features[f];
      const std::string_view tok = trim(rec[c]);
      if (!is_missing(tok)) {
        if (feat.kind == FeatureKind::categorical) {
          if (feat.declared && !feat.find(tok)) {
            throw Error("csv: value '" + std::string(tok) + "' not declared for '" + feat.name + "'");
          }
          row[f] = static_cast<double>(feat.intern(tok));
        } else {
          auto v = parse_number(tok);
          if (!v) throw Error("csv: non-numeric value '" + std::string(tok) + "' in '" + feat.name + "'");
          row[f] = *v;
        }
      }
      ++f;
    }
    cells.push_back(std::move(row));
    labels.push_back(label);
  }
  if (dropped > 0) warn("dropped " + std::to_string(dropped) + " rows without a label");
  if (cells.empty()) throw Error("csv: no labelled rows");

  const std::size_t n = cells.size();
  std::vector<bool> keep(d, true);
  if (options.drop_sparse_columns) {
    for (std::size_t f = 0; f < d; ++f) {
      std::size_t missing = 0;
      for (const auto& row : cells) missing += row[f] ? 0 : 1;
      if (3 * missing > n) {
        keep[f] = false;
        warn("dropping sparse column '" + schema.features[f].name + "'");
      }
    }
  }
  if (options.drop_dependent_columns) {
    // Mutual functional dependence on jointly observed rows.
    auto determines = [&](std::size_t a, std::size_t b) {
      std::map<double, double> seen;
      for (const auto& row : cells) {
        if (!row[a] || !row[b]) continue;
        auto [it, inserted] = seen.emplace(*row[a], *row[b]);
        if (!inserted && it->second != *row[b]) return false;
      }
      return true;
    };
    for (std::size_t b = 0; b < d; ++b) {
      if (!keep[b]) continue;
      for (std::size_t a = 0; a < b; ++a) {
        if (keep[a] && determines(a, b) && determines(b, a)) {
          keep[b] = false;
          warn("dropping column '" + schema.features[b].name + "' (one-to-one with '" +
               schema.features[a].name + "')");
          break;
        }
      }
    }
  }

  // Random imputation from the valid cells of the same column.
  for (std::size_t f = 0; f < d; ++f) {
    if (!keep[f]) continue;
    std::vector<double> donors;
    bool any_missing = false;
    for (const auto& row : cells) {
      if (row[f]) donors.push_back(*row[f]);
      else any_missing = true;
    }
    if (!any_missing) continue;
    if (donors.empty()) throw Error("csv: column '" + schema.features[f].name + "' is entirely missing");
    Rng rng = Rng::substream(options.impute_seed, f);
    for (auto& row : cells) {
      if (!row[f]) row[f] = donors[rng.below(donors.size())];
    }
  }

  TabularDataset ds;
  ds.schema = schema;
  if (std::find(keep.begin(), keep.end(), false) != keep.end()) {
    ds.schema.features.clear();
    std::size_t label_col = schema.label_column;
    for (std::size_t f = 0; f < d; ++f) {
      if (keep[f]) ds.schema.features.push_back(schema.features[f]);
      else if (f < schema.label_column) --label_col;
    }
    ds.schema.label_column = label_col;
  }
  ds.rows.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    Row row;
    row.reserve(ds.schema.dims());
    for (std::size_t f = 0; f < d; ++f) {
      if (keep[f]) row.push_back(*cells[r][f]);
    }
    ds.push_back(std::move(row), labels[r], Provenance::original, r);
  }
  return ds;
}

TabularDataset load_csv(const std::filesystem::path& csv_path, Schema schema, const LoadOptions& options) {
  return parse_csv(read_file(csv_path), std::move(schema), options);
}

TabularDataset load_csv(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path,
                        std::uint64_t impute_seed) {
  LoadOptions options;
  options.impute_seed = impute_seed;
  return load_csv(csv_path, load_schema(schema_path), options);
}

std::string features_to_csv_line(const TabularDataset& ds, std::size_t i) {
  std::string line;
  for (std::size_t f = 0; f < ds.dims(); ++f) {
    if (f) line.push_back(',');
    line += csv_escape(format_cell(ds.schema.features[f], ds.rows[i][f]));
  }
  return line;
}

std::string to_csv(const TabularDataset& ds) {
  std::string out;
  const auto& s = ds.schema;
  {
    std::size_t f = 0;
    for (std::size_t c = 0; c < s.column_count(); ++c) {
      if (c) out.push_back(',');
      out += csv_escape(c == s.label_column ? s.label.name : s.features[f++].name);
    }
    out.push_back('\n');
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t f = 0;
    for (std::size_t c = 0; c < s.column_count(); ++c) {
      if (c) out.push_back(',');
      if (c == s.label_column) {
        out += csv_escape(format_label(s.label, ds.labels[i]));
      } else {
        out += csv_escape(format_cell(s.features[f], ds.rows[i][f]));
        ++f;
      }
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const TabularDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << to_csv(ds);
}

nlohmann::json injected_sidecar(const TabularDataset& ds) {
  nlohmann::json injected = nlohmann::json::array();
  nlohmann::json recovery = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.provenance[i] == Provenance::injected) injected.push_back(i);
    if (ds.provenance[i] == Provenance::recovery) recovery.push_back(i);
  }
  return {{"injected_rows", injected}, {"recovery_rows", recovery}};
}

std::vector<std::size_t> FoldPlan::indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::size_t FoldPlan::fold_size(std::size_t fold) const {
  return static_cast<std::size_t>(std::count(fold_of.begin(), fold_of.end(), fold));
}

FoldPlan make_folds(std::size_t row_count, std::size_t fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw Error("make_folds: fold_count must be at least 2");
  if (row_count < fold_count) throw Error("make_folds: fewer rows than folds");
  std::vector<std::size_t> order(row_count);
  for (std::size_t i = 0; i < row_count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  FoldPlan plan;
  plan.fold_count = fold_count;
  plan.seed = seed;
  plan.fold_of.assign(row_count, 0);
  for (std::size_t pos = 0; pos < row_count; ++pos) plan.fold_of[order[pos]] = pos % fold_count;
  return plan;
}

TabularDataset dilute(const TabularDataset& train, const std::vector<TabularDataset>& extra_folds,
                      std::size_t multiplier) {
  if (multiplier == 0) throw Error("dilute: multiplier must be positive");
  if (multiplier - 1 > extra_folds.size()) {
    throw Error("dilute: multiplier " + std::to_string(multiplier) + " exceeds available folds");
  }
  TabularDataset out = train;
  for (std::size_t i = 0; i + 1 < multiplier; ++i) out = concat(out, extra_folds[i]);
  return out;
}

}  // namespace ldss
