#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ldss {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Emits a warning line to standard error unless warnings are muted.
void warn(std::string_view message);
void set_warnings_muted(bool muted);

enum class FeatureKind { categorical, numerical };
enum class TaskKind { classification, regression };

/// Per-row origin tag. Survives subsetting, concatenation and dilution.
enum class Provenance : std::uint8_t { original, injected, recovery, trigger };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(Provenance p);

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::numerical;
  /// Category vocabulary; a categorical cell stores its index into this list.
  /// Starts with the declared values, then grows in first-appearance order.
  std::vector<std::string> values;
  bool declared = false;

  /// Index of `token`, appending it to the vocabulary when absent.
  std::size_t intern(std::string_view token);
  std::optional<std::size_t> find(std::string_view token) const;
};

struct LabelSchema {
  std::string name;
  TaskKind task = TaskKind::classification;
  std::vector<std::string> classes;
  bool declared = false;

  std::size_t intern(std::string_view token);
  std::optional<std::size_t> find(std::string_view token) const;
};

struct Schema {
  std::vector<FeatureSchema> features;
  LabelSchema label;
  /// Position of the label column among the CSV columns.
  std::size_t label_column = 0;

  std::size_t dims() const { return features.size(); }
  std::size_t column_count() const { return features.size() + 1; }

  /// True when names, kinds and the label designation agree. Vocabularies
  /// may differ in length as long as one extends the other.
  bool compatible_with(const Schema& other) const;
};

Schema parse_schema(const nlohmann::json& j);
Schema load_schema(const std::filesystem::path& path);
nlohmann::json schema_to_json(const Schema& schema, bool include_vocabulary = true);

/// One record of feature values. Categorical cells hold the vocabulary
/// index as a double; numerical cells hold the value.
using Row = std::vector<double>;

struct TabularDataset {
  Schema schema;
  std::vector<Row> rows;
  /// Class index (classification) or real target (regression).
  std::vector<double> labels;
  std::vector<Provenance> provenance;
  /// Stable row identity assigned at load; appended rows continue the count.
  std::vector<std::size_t> ids;

  std::size_t size() const { return rows.size(); }
  std::size_t dims() const { return schema.dims(); }
  bool empty() const { return rows.empty(); }
  bool is_classification() const { return schema.label.task == TaskKind::classification; }
  std::size_t class_count() const { return schema.label.classes.size(); }
  int class_of(std::size_t i) const { return static_cast<int>(labels[i]); }

  std::size_t next_id() const;
  std::vector<std::size_t> class_histogram() const;
  std::size_t count(Provenance p) const;

  /// Appends a row; the id defaults to next_id().
  void push_back(Row row, double label, Provenance p = Provenance::original,
                 std::optional<std::size_t> id = std::nullopt);

  TabularDataset subset(const std::vector<std::size_t>& indices) const;
  TabularDataset empty_like() const;

  /// Checks row widths, cell kinds, label ranges and column alignment.
  void validate() const;
};

/// Concatenates `b` after `a`, keeping ids and provenance. The schemas must
/// be compatible; the longer vocabulary wins.
TabularDataset concat(const TabularDataset& a, const TabularDataset& b);

struct LoadOptions {
  std::uint64_t impute_seed = 0;
  /// Drop feature columns with more than a third of their cells missing.
  bool drop_sparse_columns = false;
  /// Drop a feature column that is in one-to-one correspondence with an
  /// earlier column on the rows where both are observed.
  bool drop_dependent_columns = false;
};

TabularDataset load_csv(const std::filesystem::path& csv_path,
                        const std::filesystem::path& schema_path,
                        std::uint64_t impute_seed);
TabularDataset load_csv(const std::filesystem::path& csv_path, Schema schema,
                        const LoadOptions& options = {});
TabularDataset parse_csv(std::string_view text, Schema schema, const LoadOptions& options = {});

std::string to_csv(const TabularDataset& ds);
void write_csv(const TabularDataset& ds, const std::filesystem::path& path);
/// One CSV line (no newline) holding the feature cells of row `i` only.
std::string features_to_csv_line(const TabularDataset& ds, std::size_t i);
/// Formats a cell the way write_csv does.
std::string format_cell(const FeatureSchema& f, double value);
std::string format_label(const LabelSchema& l, double value);
std::string format_number(double value);

/// Owner-side record of which rows were injected (not shipped with d_mod).
nlohmann::json injected_sidecar(const TabularDataset& ds);

/// RFC-4180 record splitting. Exposed for the oracle line protocol.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);
std::string csv_escape(std::string_view field);

struct FoldPlan {
  std::size_t fold_count = 11;
  std::uint64_t seed = 0;
  /// fold_of[row] is the fold index of each row.
  std::vector<std::size_t> fold_of;

  std::vector<std::size_t> indices(std::size_t fold) const;
  std::size_t fold_size(std::size_t fold) const;
};

FoldPlan make_folds(std::size_t row_count, std::size_t fold_count, std::uint64_t seed);
inline FoldPlan make_folds(const TabularDataset& ds, std::size_t fold_count, std::uint64_t seed) {
  return make_folds(ds.size(), fold_count, seed);
}

/// train followed by the first (multiplier - 1) extra folds.
TabularDataset dilute(const TabularDataset& train, const std::vector<TabularDataset>& extra_folds,
                      std::size_t multiplier);

}  // namespace ldss
