#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ldss/dataset.hpp"

namespace ldss {

/// Rows to add per class so that orig + inj + added has the class
/// proportions of orig: the smallest total T with T * n_c / N >= n_c + a_c
/// for every class, apportioned by largest remainder.
std::vector<std::size_t> recovery_counts(const std::vector<std::size_t>& orig, const std::vector<std::size_t>& inj);

struct RecoveryOptions {
  /// Uniform noise within +- noise_frac of each numerical column's range.
  double noise_frac = 0.05;
  /// Per categorical cell, chance of taking the value of another row of the
  /// same class.
  double cat_prob = 0.20;
};

/// Perturbed copies of d_orig rows that restore its class distribution.
/// `donors`, when given, receives the d_orig index behind every added row.
TabularDataset recover_distribution(const TabularDataset& d_orig, const TabularDataset& d_inj,
                                    const RecoveryOptions& options, std::uint64_t seed,
                                    std::vector<std::size_t>* donors = nullptr);

struct RegressionBinding {
  /// Upper edges of every class but the last; class c holds (edge[c-1], edge[c]].
  std::vector<double> edges;
  /// Observed targets per class.
  std::vector<std::vector<double>> donors;
  LabelSchema target;
  double target_min = 0;
  double target_max = 0;

  std::size_t class_count() const { return donors.size(); }
  int class_of(double value) const;
  /// Maps a target into [0, 1] by the observed range.
  double normalize(double value) const;
  /// Intended trigger target of class c: the median of its donors.
  double intended_target(int c) const;
};

/// Quantile-binned classification view of a regression dataset.
std::pair<TabularDataset, RegressionBinding> bind_regression(const TabularDataset& ds, std::size_t class_count);

/// Replaces class labels by targets drawn uniformly from the class donors
/// and restores the regression label schema.
TabularDataset finalize_regression_labels(const TabularDataset& rows, const RegressionBinding& binding,
                                          std::uint64_t seed);

nlohmann::json binding_to_json(const RegressionBinding& b);
RegressionBinding binding_from_json(const nlohmann::json& j);

struct InjectionBundle {
  /// d_orig followed by d_inj, shuffled.
  TabularDataset d_mod;
  /// Synthesized rows, then recovery rows.
  TabularDataset d_inj;
  TabularDataset recovery_rows;
};

/// Concatenates and shuffles under `shuffle_seed`.
InjectionBundle assemble(const TabularDataset& d_orig, const TabularDataset& injected,
                         const TabularDataset& recovery, std::uint64_t shuffle_seed);

}  // namespace ldss
