#include "ldss/pipeline.hpp"

#include <algorithm>

#include "ldss/isoforest.hpp"
#include "ldss/models.hpp"
#include "ldss/random.hpp"
#include "ldss/verify.hpp"

namespace ldss {

SeedBundle SeedBundle::from_base(std::uint64_t base) {
  SeedBundle s;
  s.base = base;
  s.transform = derive_seed(base, 1);
  s.forest = derive_seed(base, 2);
  s.anneal = derive_seed(base, 3);
  s.synth = derive_seed(base, 4);
  s.recovery = derive_seed(base, 5);
  s.regression = derive_seed(base, 6);
  s.shuffle = derive_seed(base, 7);
  s.trigger = derive_seed(base, 8);
  return s;
}

nlohmann::json seeds_to_json(const SeedBundle& s) {
  return {{"base", s.base},         {"transform", s.transform},   {"forest", s.forest},
          {"anneal", s.anneal},     {"synth", s.synth},           {"recovery", s.recovery},
          {"regression", s.regression}, {"shuffle", s.shuffle}, {"trigger", s.trigger}};
}

SeedBundle seeds_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned() || j.is_number_integer()) return SeedBundle::from_base(j.get<std::uint64_t>());
  if (!j.is_object()) throw Error("seed bundle: expected an integer or an object");
  SeedBundle s = SeedBundle::from_base(j.value("base", std::uint64_t{0}));
  s.transform = j.value("transform", s.transform);
  s.forest = j.value("forest", s.forest);
  s.anneal = j.value("anneal", s.anneal);
  s.synth = j.value("synth", s.synth);
  s.recovery = j.value("recovery", s.recovery);
  s.regression = j.value("regression", s.regression);
  s.shuffle = j.value("shuffle", s.shuffle);
  s.trigger = j.value("trigger", s.trigger);
  return s;
}

void RunConfig::validate() const {
  if (k < 1) throw Error("config: k must be positive");
  if (m < 1) throw Error("config: m must be positive");
  if (!(rho > 0)) throw Error("config: rho must be positive");
  if (g < 1) throw Error("config: g must be positive");
  if (balls < g) throw Error("config: G must be at least g");
  if (!(epsilon > 0 && epsilon < 1)) throw Error("config: epsilon must be in (0, 1)");
  if (!(cooling > 0 && cooling < 1)) throw Error("config: cooling must be in (0, 1)");
  if (!(contamination > 0 && contamination < 0.5)) throw Error("config: contamination must be in (0, 0.5)");
  if (state_cap < 1) throw Error("config: state_cap must be positive");
  if (!(tau > 0 && tau < 1)) throw Error("config: tau must be in (0, 1)");
  if (!(floor_quantile >= 0 && floor_quantile < 1)) throw Error("config: floor quantile must be in [0, 1)");
  if (!(min_inside_share >= 0 && min_inside_share <= 1)) throw Error("config: min_inside_share must be in [0, 1]");
  if (regression && class_count < 2) throw Error("config: class_count must be at least 2");
  if (!(ratio_threshold > 0)) throw Error("config: ratio threshold must be positive");
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {{"k", c.k},
          {"m", c.m},
          {"rho", c.rho},
          {"g", c.g},
          {"balls", c.balls},
          {"epsilon", c.epsilon},
          {"cooling", c.cooling},
          {"contamination", c.contamination},
          {"state_cap", c.state_cap},
          {"tau", c.tau},
          {"pivots", to_string(c.pivots)},
          {"retry_cap", c.retry_cap},
          {"floor_quantile", c.floor_quantile},
          {"min_inside_share", c.min_inside_share},
          {"recover", c.recover},
          {"noise_frac", c.noise_frac},
          {"cat_prob", c.cat_prob},
          {"regression", c.regression},
          {"class_count", c.class_count},
          {"ratio_threshold", c.ratio_threshold},
          {"seeds", seeds_to_json(c.seeds)}};
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw Error("config: expected a JSON object");
  static const char* known[] = {"k",       "m",         "rho",         "g",         "balls",           "epsilon",
                                "cooling", "contamination", "state_cap", "tau",     "pivots",          "retry_cap",
                                "floor_quantile", "min_inside_share", "recover", "noise_frac", "cat_prob", "regression", "class_count",
                                "ratio_threshold", "seeds"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error("config: unknown field '" + key + "'");
    }
  }
  c.k = j.value("k", c.k);
  c.m = j.value("m", c.m);
  c.rho = j.value("rho", c.rho);
  c.g = j.value("g", c.g);
  c.balls = j.value("balls", c.balls);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.cooling = j.value("cooling", c.cooling);
  c.contamination = j.value("contamination", c.contamination);
  c.state_cap = j.value("state_cap", c.state_cap);
  c.tau = j.value("tau", c.tau);
  if (j.contains("pivots")) c.pivots = pivot_strategy_from_string(j.at("pivots").get<std::string>());
  c.retry_cap = j.value("retry_cap", c.retry_cap);
  c.floor_quantile = j.value("floor_quantile", c.floor_quantile);
  c.min_inside_share = j.value("min_inside_share", c.min_inside_share);
  c.recover = j.value("recover", c.recover);
  c.noise_frac = j.value("noise_frac", c.noise_frac);
  c.cat_prob = j.value("cat_prob", c.cat_prob);
  c.regression = j.value("regression", c.regression);
  c.class_count = j.value("class_count", c.class_count);
  c.ratio_threshold = j.value("ratio_threshold", c.ratio_threshold);
  if (j.contains("seeds")) c.seeds = seeds_from_json(j.at("seeds"));
  return c;
}

Schema OwnerState::class_schema() const {
  if (!binding) return schema;
  Schema s = schema;
  s.label.task = TaskKind::classification;
  s.label.classes.clear();
  for (std::size_t c = 0; c < binding->class_count(); ++c) s.label.classes.push_back("q" + std::to_string(c));
  return s;
}

LdssRun run_ldss(const TabularDataset& d_orig, const RunConfig& cfg, const StageHook& stage) {
  const auto enter = [&](std::string_view name) {
    if (stage) stage(name);
  };
  enter("config");
  cfg.validate();
  if (d_orig.empty()) throw Error("inject: empty dataset");
  if (cfg.regression == d_orig.is_classification()) {
    throw Error(cfg.regression ? "inject: regression run needs a numerical label"
                               : "inject: numerical label needs a regression run");
  }
  LdssRun run;
  run.owner.config = cfg;
  run.owner.schema = d_orig.schema;
  const auto& seeds = cfg.seeds;

  enter("bind");
  TabularDataset view = d_orig;
  if (cfg.regression) {
    auto [v, binding] = bind_regression(d_orig, cfg.class_count);
    view = std::move(v);
    run.owner.binding = std::move(binding);
  }
  if (view.class_count() < 2) throw Error("inject: need at least two classes");

  enter("transform");
  run.owner.spec = fit_transform(view, cfg.k, cfg.m, cfg.pivots, seeds.transform);
  const Cloud cloud = embed(view, run.owner.spec);
  enter("isoforest");
  const IsolationForest forest = fit_iforest(cloud, cfg.contamination, seeds.forest);

  enter("emptyball");
  AnnealConfig anneal;
  anneal.seed_count = cfg.balls;
  anneal.epsilon = cfg.epsilon;
  anneal.cooling = cfg.cooling;
  anneal.rng_seed = seeds.anneal;
  anneal.retry_cap = cfg.retry_cap;
  run.candidates = identify_empty_balls(cloud, &forest, anneal);

  enter("rank");
  run.per_ball = per_ball_count(cfg.rho, view.size(), cfg.g);
  std::vector<int> classes(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) classes[i] = view.class_of(i);
  const auto domains = feature_domains(view, run.owner.spec);
  std::function<bool(const RankedBall&)> admit;
  if (cfg.min_inside_share > 0) {
    admit = [&](const RankedBall& rb) {
      return inside_share(rb, run.owner.spec, domains, run.per_ball, cfg.state_cap) >= cfg.min_inside_share;
    };
  }
  run.ranked = rank_and_dedup(run.candidates, cloud, classes, view.class_count(), cfg.g, run.per_ball,
                              cfg.floor_quantile, admit);

  enter("synth");
  SynthOptions synth_opts;
  synth_opts.state_cap = cfg.state_cap;
  run.owner.plan = synthesize(run.ranked, run.owner.spec, view, run.per_ball, synth_opts, seeds.synth);
  TabularDataset injected = injected_rows(run.owner.plan, view);

  enter("recover");
  TabularDataset recovery = view.empty_like();
  std::vector<std::size_t> donors;
  if (cfg.recover) {
    recovery = recover_distribution(view, injected, {cfg.noise_frac, cfg.cat_prob}, seeds.recovery, &donors);
  }

  if (run.owner.binding) {
    const auto& binding = *run.owner.binding;
    injected = finalize_regression_labels(injected, binding, seeds.regression);
    recovery.schema.label = binding.target;
    for (std::size_t i = 0; i < recovery.size(); ++i) recovery.labels[i] = d_orig.labels[donors[i]];
  }
  enter("assemble");
  run.bundle = assemble(d_orig, injected, recovery, seeds.shuffle);

  if (run.owner.binding) {
    enter("reference");
    const TabularDataset triggers = generate_triggers(run.owner, seeds.trigger);
    run.owner.reference_mae = reference_mae(d_orig, triggers, *run.owner.binding, seeds.trigger);
  }
  return run;
}

TabularDataset generate_triggers(const OwnerState& owner, std::uint64_t trigger_seed, std::size_t per_ball,
                                 TriggerStats* stats) {
  if (per_ball == 0) per_ball = owner.plan.per_ball;
  TabularDataset out = make_trigger_set(owner.plan, owner.spec, owner.class_schema(), trigger_seed, per_ball, stats);
  if (owner.binding) {
    out.schema.label = owner.binding->target;
    for (auto& label : out.labels) label = owner.binding->intended_target(static_cast<int>(label));
  }
  return out;
}

double reference_mae(const TabularDataset& d_orig, const TabularDataset& triggers, const RegressionBinding& binding,
                     std::uint64_t seed) {
  std::vector<double> maes;
  for (ModelKind kind : regressor_kinds()) {
    ModelSpec spec;
    spec.kind = kind;
    const auto model = fit_model(spec, d_orig, seed);
    const Eigen::VectorXd pred = model->predict(triggers);
    const std::vector<double> p(pred.data(), pred.data() + pred.size());
    maes.push_back(normalized_mae(p, triggers.labels, binding.target_min, binding.target_max));
  }
  return quantile(maes, 0.5);
}

nlohmann::json manifest_to_json(const LdssRun& run) {
  const OwnerState& o = run.owner;
  nlohmann::json j;
  j["format"] = kManifestFormat;
  j["config"] = config_to_json(o.config);
  j["seeds"] = seeds_to_json(o.config.seeds);
  j["schema"] = schema_to_json(o.schema);
  j["transform"] = transform_to_json(o.spec);
  j["plan"] = plan_to_json(o.plan);
  if (o.binding) {
    j["binding"] = binding_to_json(*o.binding);
    j["reference_mae"] = o.reference_mae;
  }
  j["per_ball"] = run.per_ball;
  j["d_orig_rows"] = run.bundle.d_mod.size() - run.bundle.d_inj.size();
  j["d_mod_rows"] = run.bundle.d_mod.size();

  std::vector<std::size_t> injected_ids, recovery_ids;
  const auto& d_inj = run.bundle.d_inj;
  for (std::size_t i = 0; i < d_inj.size(); ++i) {
    (d_inj.provenance[i] == Provenance::recovery ? recovery_ids : injected_ids).push_back(d_inj.ids[i]);
  }
  j["injected_ids"] = injected_ids;
  j["recovery_ids"] = recovery_ids;
  // Row positions inside the shipped d_mod.
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < run.bundle.d_mod.size(); ++i) {
    if (run.bundle.d_mod.provenance[i] != Provenance::original) positions.push_back(i);
  }
  j["d_mod_inj_positions"] = positions;

  const Schema cls = o.class_schema();
  nlohmann::json balls = nlohmann::json::array();
  std::size_t next = 0;
  for (std::size_t b = 0; b < o.plan.balls.size(); ++b) {
    const auto& bp = o.plan.balls[b];
    const auto& rb = run.ranked[b];
    std::vector<std::size_t> ids(injected_ids.begin() + static_cast<std::ptrdiff_t>(next),
                                 injected_ids.begin() + static_cast<std::ptrdiff_t>(next + bp.injected.size()));
    next += bp.injected.size();
    balls.push_back({{"ball_id", bp.ball_id},
                     {"target_class", cls.label.classes[static_cast<std::size_t>(bp.target_class)]},
                     {"radius", bp.radius},
                     {"original_radius", rb.original_radius},
                     {"gap", bp.gap},
                     {"seed_index", rb.ball.seed_index},
                     {"pruned", bp.pruned},
                     {"injected_ids", ids}});
  }
  j["balls"] = std::move(balls);
  return j;
}

OwnerState owner_from_manifest(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kManifestFormat) throw Error("manifest: unsupported format");
  OwnerState o;
  o.config = config_from_json(j.at("config"));
  o.schema = parse_schema(j.at("schema"));
  o.spec = transform_from_json(j.at("transform"));
  o.plan = plan_from_json(j.at("plan"));
  if (j.contains("binding")) {
    o.binding = binding_from_json(j.at("binding"));
    o.reference_mae = j.value("reference_mae", 0.0);
  }
  if (o.spec.dims() != o.schema.dims()) throw Error("manifest: transform does not match the schema");
  if (o.plan.k != o.spec.k || o.plan.m != o.spec.m) throw Error("manifest: plan does not match the transform");
  return o;
}

}  // namespace ldss
