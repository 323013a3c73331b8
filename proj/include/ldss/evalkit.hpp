#pragma once

// Label-flipping baselines and the evaluation metrics: trigger accuracy,
// fidelity across folds, and security profiles in the embedded space.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/models.hpp"
#include "ldss/pipeline.hpp"
#include "ldss/transform.hpp"
#include "ldss/types.hpp"

namespace ldss {

enum class Method { ldss, flip, flip_nn };
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct FlipResult {
  /// The input with flipped labels; flipped rows are tagged injected.
  TabularDataset modified;
  /// Flipped rows with their new labels, in flip order.
  TabularDataset triggers;
  std::vector<std::size_t> flipped;
};

/// Flips g*h random rows to a uniformly drawn different label.
FlipResult run_flip(const TabularDataset& ds, std::size_t g, std::size_t h, std::uint64_t seed);

/// For g random anchors, relabels the h embedded nearest rows (the anchor
/// included) to the least frequent label of that neighborhood, or of the
/// whole dataset when `local` is false. Later anchors win on overlap.
FlipResult run_flip_nn(const TabularDataset& ds, const TransformSpec& spec, std::size_t g, std::size_t h,
                       std::uint64_t seed, bool local = true);

struct DistanceSummary {
  std::size_t count = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
};

DistanceSummary summarize(std::vector<double> values);

/// Distance from every point to its kappa-th nearest other point.
std::vector<std::vector<double>> knn_distances(const Cloud& cloud, const std::vector<int>& kappas);

struct KnnProfile {
  std::vector<int> kappas;
  /// Per provenance present, one summary per kappa.
  std::vector<std::pair<Provenance, std::vector<DistanceSummary>>> groups;

  const std::vector<DistanceSummary>* find(Provenance p) const;
};

KnnProfile knn_distance_profile(const Cloud& cloud, const std::vector<Provenance>& provenance,
                                const std::vector<int>& kappas = {1, 4, 7, 10});

struct OutlierProfile {
  std::vector<double> contaminations;
  /// Percent of injected rows flagged per level.
  std::vector<double> injected_pct;
  /// Percent of all rows flagged per level.
  std::vector<double> overall_pct;
};

/// Fits one forest on the whole cloud and flags rows above the
/// (1 - contamination) score quantile at every level.
OutlierProfile outlier_profile(const Cloud& cloud, const std::vector<Provenance>& provenance,
                               const std::vector<double>& contaminations = {0.01, 0.05, 0.1},
                               std::uint64_t seed = 0);

struct Fidelity {
  double mean_orig = 0;
  double mean_method = 0;
  /// Mean and max over folds of |acc_orig - acc_method|.
  double aad = 0;
  double mad = 0;
};

Fidelity fidelity(const std::vector<double>& acc_orig, const std::vector<double>& acc_method);

struct SecurityReport {
  KnnProfile ldss;
  OutlierProfile outliers;
  /// kappa-NN summaries of the rows each baseline relabels, on the same cloud.
  std::vector<std::pair<Method, std::vector<DistanceSummary>>> baselines;
};

/// Runs LDSS on `d_orig`, embeds d_mod with the fitted transform and
/// profiles it; the baselines use the same g and h.
SecurityReport security_profile(const TabularDataset& d_orig, const RunConfig& cfg, bool flip_nn_local = true,
                                const std::vector<int>& kappas = {1, 4, 7, 10});

nlohmann::json security_to_json(const SecurityReport& r);

struct EvalOptions {
  std::vector<Method> methods = {Method::ldss, Method::flip, Method::flip_nn};
  std::vector<ModelKind> models = classifier_kinds();
  std::size_t folds = 11;
  std::vector<std::size_t> multipliers = {1};
  RunConfig config;
  bool flip_nn_local = true;
};

struct EvalCell {
  Method method = Method::ldss;
  ModelKind model = ModelKind::knn;
  std::size_t fold = 0;
  std::size_t multiplier = 1;
  bool ok = false;
  std::string error;
  std::size_t trigger_count = 0;
  double train_acc_orig = 0;
  double test_acc_orig = 0;
  double train_acc_mod = 0;
  double test_acc_mod = 0;
  double trigger_acc_orig = 0;
  double trigger_acc_mod = 0;
};

struct EvalSummary {
  Method method = Method::ldss;
  ModelKind model = ModelKind::knn;
  std::size_t multiplier = 1;
  std::size_t folds_ok = 0;
  Fidelity train;
  Fidelity test;
  double trigger_acc_orig = 0;
  double trigger_acc_mod = 0;
};

struct EvalReport {
  EvalOptions options;
  std::vector<EvalCell> cells;
  std::vector<EvalSummary> summary;
};

/// Fold i is D_orig and fold i+1 (cyclic) the test set; the remaining
/// folds, in order, supply dilution rows. A failing cell is recorded and
/// the grid continues.
EvalReport run_eval(const TabularDataset& ds, const EvalOptions& options);

std::vector<EvalSummary> summarize_cells(const std::vector<EvalCell>& cells);
nlohmann::json eval_to_json(const EvalReport& r);
/// One row per (model, multiplier) with Acc/AAD/MAD x train/test x method.
std::string eval_tables_csv(const EvalReport& r);

}  // namespace ldss
