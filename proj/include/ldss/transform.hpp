#pragma once

// Mixed tabular rows -> element sets -> Jaccard distances to m pivots.
//
// A numerical feature is cut into at most k+1 ordered bins by exact 1-D
// k-means. Every feature then contributes k elements to a row's set:
//   categorical value c  ->  {(f, c, j) : j = 1..k}
//   numerical bin b      ->  {(f, b + j) : j = 1..k}
// so two rows share k elements on an equal category, none on a different
// one, and max(0, k - |b1 - b2|) on numerical bins b1, b2. Coordinate j of
// the embedding is the Jaccard distance from the row's set to pivot j.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/types.hpp"

namespace ldss {

/// Category code used for values unseen when the transform was fitted.
inline constexpr int kUnknownCategory = -1;

/// Exact 1-D k-means (optimal SSE) over `values`, returning ascending
/// centers. Produces one center per distinct value when there are no more
/// distinct values than `clusters`.
std::vector<double> kmeans_1d(std::span<const double> values, std::size_t clusters);

struct Discretizer {
  /// Ascending bin centers per feature; empty for categorical features.
  std::vector<std::vector<double>> centers;

  /// Nearest center, ties to the lower bin. Values outside the fitted range
  /// clamp to the first or last bin.
  int bin_of(std::size_t feature, double value) const;
  std::size_t bin_count(std::size_t feature) const { return centers[feature].size(); }
};

Discretizer fit_discretizer(const TabularDataset& ds, int k);

struct Element {
  std::uint32_t feature = 0;
  /// Category code, or -2 for a numerical element.
  std::int32_t category = -2;
  /// j for categorical elements, bin + j for numerical ones.
  std::int32_t slot = 0;

  friend auto operator<=>(const Element&, const Element&) = default;
};

/// Sorted, duplicate-free set of elements.
using ElementSet = std::vector<Element>;

/// Jaccard distance 1 - |a n b| / |a u b| over sorted element sets.
double jaccard(const ElementSet& a, const ElementSet& b);

/// Per-feature discrete code: category code or numerical bin.
using CodedRow = std::vector<int>;

enum class PivotStrategy { random_rows, value_frequency };
std::string_view to_string(PivotStrategy s);
PivotStrategy pivot_strategy_from_string(std::string_view s);

struct PivotSet {
  std::vector<CodedRow> pivots;
  PivotStrategy strategy = PivotStrategy::value_frequency;
};

enum class UnknownCategoryPolicy { fresh, reject };

struct TransformSpec {
  int k = 10;
  std::size_t m = 10;
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  /// Categorical vocabulary at fit time; codes beyond it are unknown.
  std::vector<std::vector<std::string>> vocabulary;
  Discretizer discretizer;
  PivotSet pivots;
  UnknownCategoryPolicy unknown_policy = UnknownCategoryPolicy::fresh;

  std::size_t dims() const { return kinds.size(); }
  /// Elements per row: k * d.
  int set_size() const { return k * static_cast<int>(dims()); }
};

/// Discretizer plus an empty pivot set; pivots are added by build_pivots.
TransformSpec fit_transform_base(const TabularDataset& ds, int k);
PivotSet build_pivots(const TabularDataset& ds, const TransformSpec& base, std::size_t m,
                      PivotStrategy strategy, std::uint64_t seed);
/// Pivots taken from the given rows, in order.
PivotSet pivots_from_rows(const TabularDataset& ds, const TransformSpec& base,
                          const std::vector<std::size_t>& rows);
TransformSpec fit_transform(const TabularDataset& ds, int k, std::size_t m, PivotStrategy strategy,
                            std::uint64_t seed);

CodedRow code_row(const Row& row, const TransformSpec& spec);
/// The k elements a single coded feature contributes.
void append_feature_elements(ElementSet& out, std::size_t feature, int code, const TransformSpec& spec);
ElementSet element_set(const CodedRow& coded, const TransformSpec& spec);
ElementSet map_row(const Row& row, const TransformSpec& spec);

/// Shared element count between two codes of one feature.
int shared_elements(const TransformSpec& spec, std::size_t feature, int a, int b);

/// Embedding of an already coded row.
Point embed_coded(const CodedRow& coded, const TransformSpec& spec);
Point embed(const Row& row, const TransformSpec& spec);
Cloud embed(const TabularDataset& ds, const TransformSpec& spec);

/// Every element a fitted transform can produce, ordered by feature, then
/// category name (categorical) or slot (numerical), then j.
std::vector<Element> element_universe(const TransformSpec& spec);
/// Renders an element as "(1, F, 1)" or "(5, 3)" with 1-based feature index.
std::string describe(const Element& e, const TransformSpec& spec);

nlohmann::json transform_to_json(const TransformSpec& spec);
TransformSpec transform_from_json(const nlohmann::json& j);

}  // namespace ldss
