#pragma once

// End-to-end injection run and the owner-side manifest that lets trigger
// sets be regenerated later without the original data.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/emptyball.hpp"
#include "ldss/inject.hpp"
#include "ldss/synth.hpp"
#include "ldss/transform.hpp"

namespace ldss {

struct SeedBundle {
  std::uint64_t base = 0;
  std::uint64_t transform = 0;
  std::uint64_t forest = 0;
  std::uint64_t anneal = 0;
  std::uint64_t synth = 0;
  std::uint64_t recovery = 0;
  std::uint64_t regression = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t trigger = 0;

  /// Every stage seed derived from one base seed.
  static SeedBundle from_base(std::uint64_t base);
};

nlohmann::json seeds_to_json(const SeedBundle& s);
/// Accepts a full bundle or {"base": n}; missing stage seeds derive from base.
SeedBundle seeds_from_json(const nlohmann::json& j);

struct RunConfig {
  int k = 10;
  std::size_t m = 10;
  double rho = 0.10;
  std::size_t g = 10;
  /// Annealing seeds G.
  std::size_t balls = 500;
  double epsilon = 0.01;
  double cooling = 0.8;
  double contamination = 0.05;
  std::size_t state_cap = 75000;
  double tau = 0.6;
  PivotStrategy pivots = PivotStrategy::value_frequency;
  std::size_t retry_cap = 200;
  double floor_quantile = 0.10;
  /// A ball is used only if at least this share of its rows embeds inside
  /// it; 0 disables the check.
  double min_inside_share = 0;
  bool recover = true;
  double noise_frac = 0.05;
  double cat_prob = 0.20;
  bool regression = false;
  std::size_t class_count = 4;
  double ratio_threshold = 0.5;
  SeedBundle seeds = SeedBundle::from_base(0);

  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& c);
/// Fields present in `j` override those of `base`.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

/// What the owner keeps to regenerate triggers and judge suspects.
struct OwnerState {
  RunConfig config;
  /// Schema of the original data (regression label included).
  Schema schema;
  TransformSpec spec;
  SynthPlan plan;
  std::optional<RegressionBinding> binding;
  /// Median normalized trigger MAE of regressors trained on the original
  /// data, on the trigger set of seeds.trigger. Zero for classification.
  double reference_mae = 0;

  /// Schema the plan's class indices refer to.
  Schema class_schema() const;
};

struct LdssRun {
  OwnerState owner;
  InjectionBundle bundle;
  std::vector<EmptyBall> candidates;
  std::vector<RankedBall> ranked;
  std::size_t per_ball = 0;
};

/// Called with the name of each stage as it starts.
using StageHook = std::function<void(std::string_view)>;

LdssRun run_ldss(const TabularDataset& d_orig, const RunConfig& cfg, const StageHook& stage = {});

/// Triggers with intended labels: class names, or for regression the
/// median donor target of the ball's class. `per_ball` 0 means h.
TabularDataset generate_triggers(const OwnerState& owner, std::uint64_t trigger_seed, std::size_t per_ball = 0,
                                 TriggerStats* stats = nullptr);

/// Median normalized trigger MAE over the built-in regressors fitted on
/// `d_orig` with `seed`.
double reference_mae(const TabularDataset& d_orig, const TabularDataset& triggers, const RegressionBinding& binding,
                     std::uint64_t seed);

inline constexpr const char* kManifestFormat = "ldss-manifest/1";

nlohmann::json manifest_to_json(const LdssRun& run);
OwnerState owner_from_manifest(const nlohmann::json& j);

}  // namespace ldss
