#pragma once

// Ball ranking and sample synthesis.
//
// A row's embedding depends only on how many elements it shares with each
// pivot, so a target point in the embedded space becomes an integer target
// weight vector. Picking one value per feature so that the summed per-value
// weights approach that target is a multidimensional knapsack, solved by a
// forward DP over features with per-level state pruning and a randomized
// backtrack.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/emptyball.hpp"
#include "ldss/transform.hpp"
#include "ldss/types.hpp"

namespace ldss {

struct RankedBall {
  /// Center and effective radius (after overlap shrinking).
  EmptyBall ball;
  double original_radius = 0;
  int target_class = 0;
  /// (max class count - min class count) / h over the neighborhood.
  double gap = 0;
  std::size_t rank = 0;
  std::vector<std::size_t> neighborhood;
};

/// Indices of the `count` cloud points nearest to `center` (ties by index).
std::vector<std::size_t> nearest_indices(const Point& center, const Cloud& cloud, std::size_t count);

/// Least frequent class over the full alphabet (ties to the lower index)
/// and the normalized max-min gap among `neighborhood`.
std::pair<int, double> local_gap(std::span<const std::size_t> neighborhood, std::span<const int> classes,
                                 std::size_t class_count);

/// Ranks balls by local gap (then radius, then seed index), shrinks balls
/// overlapping a better-ranked selection, drops those whose effective radius
/// falls below the `floor_quantile` quantile of all candidate radii, and
/// returns the top g survivors. When `admit` is given, a ball it rejects
/// (after shrinking) is skipped like one below the floor.
std::vector<RankedBall> rank_and_dedup(const std::vector<EmptyBall>& balls, const Cloud& cloud,
                                       std::span<const int> classes, std::size_t class_count, std::size_t g,
                                       std::size_t h, double floor_quantile = 0.10,
                                       const std::function<bool(const RankedBall&)>& admit = {});

using Weight = std::vector<int>;

int round_half_up(double x);
/// l(J) = 2dk(1 - J) / (2 - J); tends to 2dk as J goes to minus infinity.
double shared_from_jaccard(double jaccard_distance, int d, int k);
/// J = 1 - l / (2dk - l); minus infinity at l = 2dk.
double jaccard_from_shared(double shared, int d, int k);

/// Shared elements between `code` of `feature` and that feature of every pivot.
Weight value_weight(const TransformSpec& spec, std::size_t feature, int code);
/// Rounded l(c_j) per coordinate; coordinates are clamped into [0, 1] first.
Weight target_weight(const Point& center, int d, int k);
/// The embedded point of any row whose pivot overlaps are `w`.
Point embed_weight(std::span<const int> w, int set_size);

/// One DP level: sorted unique weights, each with the (ascending) indices of
/// the values that end a reachable assignment at that weight.
struct DPLevel {
  std::size_t m = 0;
  std::vector<int> weights;
  std::vector<std::vector<int>> values;

  std::size_t size() const { return values.size(); }
  std::size_t state_count() const;
  std::span<const int> weight(std::size_t i) const { return {weights.data() + i * m, m}; }
  std::optional<std::size_t> find(std::span<const int> w) const;
};

struct FinalState {
  Weight w;
  int value = 0;
  double linf = 0;
};

struct KnapsackProblem {
  /// items[i][v]: weight of value v of feature i.
  std::vector<std::vector<Weight>> items;
  Weight target;
  std::size_t state_cap = 75000;
  /// When positive, equal L-infinity scores are ordered by the Euclidean
  /// distance between the embedded weight and `center`.
  int set_size = 0;
  Point center;
};

struct KnapsackSolution {
  std::vector<DPLevel> levels;
  /// Every final state, best first.
  std::vector<FinalState> ranked;
  std::size_t peak_states = 0;
  bool pruned = false;
  bool capped_candidates = false;
};

KnapsackSolution solve_knapsack(const KnapsackProblem& problem);

/// Value indices, one per feature, ending in `final`. Predecessor values are
/// chosen uniformly among those stored at the required weight.
std::vector<int> backtrack(const std::vector<std::vector<Weight>>& items, const std::vector<DPLevel>& levels,
                           const FinalState& final, Rng& rng);

/// Distinct observed values of one feature as DP items. Numerical features
/// use bins; `raw[v]` lists the observed raw values inside each bin.
struct FeatureDomain {
  std::vector<int> codes;
  std::vector<Weight> weights;
  std::vector<std::vector<double>> raw;
};

std::vector<FeatureDomain> feature_domains(const TabularDataset& ds, const TransformSpec& spec);

struct BallPlan {
  std::size_t ball_id = 0;
  int target_class = 0;
  Point center;
  double radius = 0;
  double gap = 0;
  Weight target;
  /// Levels restricted to the states reachable backwards from `finals`.
  std::vector<DPLevel> levels;
  /// The top final states used for synthesis, best first.
  std::vector<FinalState> finals;
  std::vector<Row> injected;
  bool pruned = false;
};

struct SynthPlan {
  int k = 0;
  std::size_t m = 0;
  std::vector<FeatureDomain> domains;
  std::vector<BallPlan> balls;
  std::size_t per_ball = 0;
};

struct SynthOptions {
  std::size_t state_cap = 75000;
  /// Redraws allowed when a synthesized row repeats an original or an
  /// earlier synthesized row.
  std::size_t redraw_cap = 50;
};

/// h = ceil(rho * n / g).
std::size_t per_ball_count(double rho, std::size_t n, std::size_t g);

/// Solves and backtracks one ball; the returned plan holds h rows.
BallPlan synthesize_in_ball(const RankedBall& rb, const TransformSpec& spec, const std::vector<FeatureDomain>& domains,
                            std::size_t h, const SynthOptions& options, std::uint64_t rng_seed,
                            const std::vector<Row>* avoid = nullptr);

/// Share of the h synthesized rows whose final state embeds within the
/// ball's effective radius. Depends only on the DP, not on backtracking.
double inside_share(const RankedBall& rb, const TransformSpec& spec, const std::vector<FeatureDomain>& domains,
                    std::size_t h, std::size_t state_cap);

SynthPlan synthesize(const std::vector<RankedBall>& balls, const TransformSpec& spec, const TabularDataset& ds,
                     std::size_t h, const SynthOptions& options, std::uint64_t seed);

/// All injected rows, labeled with their ball's target class.
TabularDataset injected_rows(const SynthPlan& plan, const TabularDataset& like);

struct TriggerStats {
  /// Trigger rows identical to an injected row.
  std::size_t overlaps = 0;
  /// Trigger rows accepted outside their ball's effective radius.
  std::size_t outside = 0;
};

/// Re-runs backtracking with `trigger_seed`. Each row is redrawn (up to 50
/// times, cycling over the ball's final states) until it embeds within the
/// ball's radius and differs from every injected row; otherwise the nearest
/// draw is kept.
TabularDataset make_trigger_set(const SynthPlan& plan, const TransformSpec& spec, const Schema& schema,
                                std::uint64_t trigger_seed, std::size_t per_ball, TriggerStats* stats = nullptr);

nlohmann::json plan_to_json(const SynthPlan& plan);
SynthPlan plan_from_json(const nlohmann::json& j);

}  // namespace ldss
