// ldss command-line tool. Machine output goes to files or standard out;
// human-readable messages go to standard error.
//
// Exit codes: 0 success (verify: not_leaked), 2 error, 3 verify: leaked,
// 4 verify: oracle protocol violation.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/evalkit.hpp"
#include "ldss/fixtures.hpp"
#include "ldss/models.hpp"
#include "ldss/pipeline.hpp"
#include "ldss/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ldss;

namespace {

constexpr int kExitError = 2;
constexpr int kExitLeaked = 3;
constexpr int kExitProtocol = 4;

std::string g_stage = "cli";

struct StageError : Error {
  StageError(std::string stage, const std::string& what) : Error(what), stage(std::move(stage)) {}
  std::string stage;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Hyperparameter flags shared by inject and eval. Applied on top of the
/// config file only when given.
struct ConfigFlags {
  std::string config_path;
  std::string seed_bundle;
  int k = 0;
  std::size_t m = 0, g = 0, balls = 0, state_cap = 0, class_count = 0;
  double rho = 0, epsilon = 0, cooling = 0, contamination = 0, tau = 0;
  bool regression = false;
  std::string pivots;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file mirroring the run configuration");
    bind(app->add_option("--k", k, "bins and elements per feature"), [this](RunConfig& c) { c.k = k; });
    bind(app->add_option("--m", m, "pivot count"), [this](RunConfig& c) { c.m = m; });
    bind(app->add_option("--rho", rho, "injection ratio"), [this](RunConfig& c) { c.rho = rho; });
    bind(app->add_option("--g", g, "balls used for injection"), [this](RunConfig& c) { c.g = g; });
    bind(app->add_option("--balls", balls, "annealing seeds G"), [this](RunConfig& c) { c.balls = balls; });
    bind(app->add_option("--epsilon", epsilon, "final temperature"), [this](RunConfig& c) { c.epsilon = epsilon; });
    bind(app->add_option("--cooling", cooling, "cooling factor"), [this](RunConfig& c) { c.cooling = cooling; });
    bind(app->add_option("--contamination", contamination, "isolation forest contamination"),
         [this](RunConfig& c) { c.contamination = contamination; });
    bind(app->add_option("--state-cap", state_cap, "DP states kept per level"),
         [this](RunConfig& c) { c.state_cap = state_cap; });
    bind(app->add_option("--tau", tau, "verdict threshold"), [this](RunConfig& c) { c.tau = tau; });
    bind(app->add_flag("--regression", regression, "treat the label as a real target"),
         [this](RunConfig& c) { c.regression = regression; });
    bind(app->add_option("--class-count", class_count, "classes for a regression target"),
         [this](RunConfig& c) { c.class_count = class_count; });
    bind(app->add_option("--pivots", pivots, "value_frequency or random_rows"),
         [this](RunConfig& c) { c.pivots = pivot_strategy_from_string(pivots); });
    app->add_option("--seed-bundle", seed_bundle, "base seed, or a JSON seed bundle file");
  }

  void bind(CLI::Option* opt, std::function<void(RunConfig&)> fn) { setters.emplace_back(opt, std::move(fn)); }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) c = config_from_json(read_json(config_path));
    for (const auto& [opt, fn] : setters) {
      if (opt->count() > 0) fn(c);
    }
    if (!seed_bundle.empty()) c.seeds = parse_seed_bundle(seed_bundle);
    c.validate();
    return c;
  }

  static SeedBundle parse_seed_bundle(const std::string& s) {
    const bool numeric = !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); });
    if (numeric) return SeedBundle::from_base(std::stoull(s));
    return seeds_from_json(read_json(s));
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

TabularDataset load_data(const std::string& data, const std::string& schema) {
  g_stage = "load";
  if (schema.empty() || !fs::exists(schema)) throw StageError("load", "schema file not found: '" + schema + "'");
  if (!fs::exists(data)) throw StageError("load", "data file not found: '" + data + "'");
  return load_csv(data, schema, 0);
}

// inject -----------------------------------------------------------------

struct InjectArgs {
  std::string data, schema, out = "d_mod.csv", manifest = "owner_manifest.json";
  ConfigFlags flags;
};

int cmd_inject(const InjectArgs& a) {
  g_stage = "config";
  const RunConfig cfg = a.flags.resolve();
  const TabularDataset d_orig = load_data(a.data, a.schema);
  const LdssRun run = run_ldss(d_orig, cfg, [](std::string_view s) { g_stage = std::string(s); });
  g_stage = "write";
  write_csv(run.bundle.d_mod, a.out);
  write_json(a.manifest, manifest_to_json(run));
  std::cerr << "inject: " << d_orig.size() << " original rows, " << run.bundle.d_inj.size() - run.bundle.recovery_rows.size()
            << " injected, " << run.bundle.recovery_rows.size() << " recovery -> " << a.out << "\n";
  return 0;
}

// trigger ----------------------------------------------------------------

struct TriggerArgs {
  std::string manifest = "owner_manifest.json", out = "d_trig.csv", meta;
  std::string seed_bundle;
  std::uint64_t trigger_seed = 0;
  bool seed_given = false;
  std::size_t count = 0;
};

std::string meta_path_for(const std::string& triggers) { return triggers + ".meta.json"; }

int cmd_trigger(const TriggerArgs& a) {
  g_stage = "manifest";
  const OwnerState owner = owner_from_manifest(read_json(a.manifest));
  std::uint64_t seed = owner.config.seeds.trigger;
  if (!a.seed_bundle.empty()) seed = ConfigFlags::parse_seed_bundle(a.seed_bundle).trigger;
  if (a.seed_given) seed = a.trigger_seed;
  g_stage = "trigger";
  TriggerStats stats;
  const TabularDataset trig = generate_triggers(owner, seed, a.count, &stats);
  g_stage = "write";
  write_csv(trig, a.out);
  json meta = {{"format", "ldss-triggers/1"},
               {"schema", schema_to_json(trig.schema)},
               {"task", trig.is_classification() ? "classification" : "regression"},
               {"tau", owner.config.tau},
               {"trigger_seed", seed},
               {"rows", trig.size()},
               {"overlaps", stats.overlaps},
               {"outside_radius", stats.outside}};
  if (owner.binding) {
    meta["reference_mae"] = owner.reference_mae;
    meta["ratio_threshold"] = owner.config.ratio_threshold;
    meta["target_min"] = owner.binding->target_min;
    meta["target_max"] = owner.binding->target_max;
  }
  write_json(a.meta.empty() ? meta_path_for(a.out) : a.meta, meta);
  if (stats.overlaps > 0) std::cerr << "trigger: " << stats.overlaps << " rows repeat an injected row\n";
  std::cerr << "trigger: " << trig.size() << " rows -> " << a.out << "\n";
  return 0;
}

// verify -----------------------------------------------------------------

struct VerifyArgs {
  std::string triggers = "d_trig.csv", meta, oracle, model, out;
  double tau = 0;
  double reference = 0;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* reference_opt = nullptr;
};

int cmd_verify(const VerifyArgs& a) {
  g_stage = "load";
  const json meta = read_json(a.meta.empty() ? meta_path_for(a.triggers) : a.meta);
  const TabularDataset trig = load_csv(a.triggers, parse_schema(meta.at("schema")));
  if (trig.empty()) throw Error("verify: empty trigger set");

  g_stage = "query";
  std::vector<std::string> tokens;
  if (!a.model.empty()) {
    const auto model = model_from_json(read_json(a.model));
    ModelOracle oracle(*model);
    tokens = query(oracle, trig);
  } else if (!a.oracle.empty()) {
    auto oracle = SubprocessOracle::shell(a.oracle);
    tokens = query(oracle, trig);
  } else {
    throw Error("verify: give --oracle or --model");
  }

  g_stage = "verdict";
  VerificationReport report;
  if (trig.is_classification()) {
    const double tau = a.tau_opt->count() ? a.tau : meta.value("tau", 0.6);
    std::vector<std::string> intended;
    for (double l : trig.labels) intended.push_back(format_label(trig.schema.label, l));
    report = verdict_classification(tokens, intended, tau);
  } else {
    std::vector<double> preds;
    for (const auto& t : tokens) preds.push_back(parse_real_token(t));
    const double ref = a.reference_opt->count() ? a.reference : meta.at("reference_mae").get<double>();
    report = verdict_regression(preds, trig.labels, ref, meta.at("target_min").get<double>(),
                                meta.at("target_max").get<double>(), meta.value("ratio_threshold", 0.5));
  }
  const json j = report_to_json(report);
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(a.out, j);
  }
  std::cerr << "verify: " << (report.leaked ? "leaked" : "not_leaked") << "\n";
  return report.leaked ? kExitLeaked : 0;
}

// train / oracle ---------------------------------------------------------

struct TrainArgs {
  std::string data, schema, kind = "knn", out = "model.json";
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  const TabularDataset ds = load_data(a.data, a.schema);
  g_stage = "train";
  ModelSpec spec;
  spec.kind = model_kind_from_string(a.kind);
  const auto model = fit_model(spec, ds, a.seed);
  g_stage = "write";
  write_json(a.out, model->to_json());
  return 0;
}

int cmd_serve(const std::string& model_path) {
  g_stage = "oracle";
  const auto model = model_from_json(read_json(model_path));
  serve(*model, std::cin, std::cout);
  return 0;
}

// eval -------------------------------------------------------------------

struct EvalArgs {
  std::string data, schema, methods = "ldss,flip,flip_nn", models, multipliers = "1";
  std::string out = "eval_report.json", tables = "tables.csv", security;
  std::size_t folds = 11;
  bool flip_nn_global = false;
  ConfigFlags flags;
};

int cmd_eval(const EvalArgs& a) {
  g_stage = "config";
  EvalOptions opt;
  opt.config = a.flags.resolve();
  opt.folds = a.folds;
  opt.flip_nn_local = !a.flip_nn_global;
  opt.methods.clear();
  for (const auto& m : split_list(a.methods)) opt.methods.push_back(method_from_string(m));
  if (!a.models.empty()) {
    opt.models.clear();
    for (const auto& m : split_list(a.models)) opt.models.push_back(model_kind_from_string(m));
  }
  opt.multipliers.clear();
  for (const auto& m : split_list(a.multipliers)) opt.multipliers.push_back(std::stoul(m));
  const TabularDataset ds = load_data(a.data, a.schema);
  g_stage = "eval";
  const EvalReport report = run_eval(ds, opt);
  json j = eval_to_json(report);
  if (!a.security.empty()) {
    g_stage = "security";
    write_json(a.security, security_to_json(security_profile(ds, opt.config, opt.flip_nn_local)));
  }
  g_stage = "write";
  write_json(a.out, j);
  write_text(a.tables, eval_tables_csv(report));
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += !c.ok;
  std::cerr << "eval: " << report.cells.size() << " cells, " << failed << " failed\n";
  return 0;
}

// security ---------------------------------------------------------------

struct SecurityArgs {
  std::string data, schema, out;
  bool flip_nn_global = false;
  ConfigFlags flags;
};

int cmd_security(const SecurityArgs& a) {
  g_stage = "config";
  const RunConfig cfg = a.flags.resolve();
  const TabularDataset ds = load_data(a.data, a.schema);
  g_stage = "security";
  const json j = security_to_json(security_profile(ds, cfg, !a.flip_nn_global));
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(a.out, j);
  }
  return 0;
}

// fixture ----------------------------------------------------------------

struct FixtureArgs {
  std::string kind = "classification", out = "data.csv", schema_out = "schema.json";
  std::size_t rows = 2000;
  std::uint64_t seed = 0;
};

int cmd_fixture(const FixtureArgs& a) {
  g_stage = "fixture";
  TabularDataset ds;
  if (a.kind == "pet") {
    ds = pet_dataset();
  } else if (a.kind == "classification") {
    ds = synthetic_classification(a.rows, a.seed);
  } else if (a.kind == "regression") {
    ds = synthetic_regression(a.rows, a.seed);
  } else {
    throw Error("fixture: unknown kind '" + a.kind + "'");
  }
  write_csv(ds, a.out);
  write_json(a.schema_out, schema_to_json(ds.schema));
  return 0;
}

void print_error(const std::string& stage, const std::string& message) {
  std::cout << json{{"error", message}, {"stage", stage}}.dump() << "\n";
  std::cerr << "ldss: " << stage << ": " << message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset leak detection by synthetic sample injection"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "mute warnings");

  InjectArgs inject;
  auto* sub_inject = app.add_subcommand("inject", "write d_mod.csv and the owner manifest");
  sub_inject->add_option("--data", inject.data, "original CSV")->required();
  sub_inject->add_option("--schema", inject.schema, "schema JSON")->required();
  sub_inject->add_option("--out", inject.out, "modified dataset CSV");
  sub_inject->add_option("--manifest", inject.manifest, "owner manifest JSON");
  inject.flags.add(sub_inject);

  TriggerArgs trigger;
  auto* sub_trigger = app.add_subcommand("trigger", "regenerate a trigger set from the manifest");
  sub_trigger->add_option("--manifest", trigger.manifest, "owner manifest JSON");
  auto* seed_opt = sub_trigger->add_option("--trigger-seed", trigger.trigger_seed, "trigger seed");
  sub_trigger->add_option("--count", trigger.count, "rows per ball (default h)");
  sub_trigger->add_option("--out", trigger.out, "trigger CSV with intended labels");
  sub_trigger->add_option("--meta", trigger.meta, "sidecar JSON (default <out>.meta.json)");
  sub_trigger->add_option("--seed-bundle", trigger.seed_bundle, "base seed, or a JSON seed bundle file");

  VerifyArgs verify;
  auto* sub_verify = app.add_subcommand("verify", "query a suspect model with the trigger set");
  sub_verify->add_option("--triggers", verify.triggers, "trigger CSV");
  sub_verify->add_option("--meta", verify.meta, "trigger sidecar JSON");
  sub_verify->add_option("--oracle", verify.oracle, "shell command speaking the line protocol");
  sub_verify->add_option("--model", verify.model, "model JSON queried in process");
  verify.tau_opt = sub_verify->add_option("--tau", verify.tau, "verdict threshold");
  verify.reference_opt = sub_verify->add_option("--reference-mae", verify.reference, "regression reference MAE");
  sub_verify->add_option("--out", verify.out, "report JSON (default standard out)");
  std::string unused_bundle;
  sub_verify->add_option("--seed-bundle", unused_bundle, "accepted for uniformity; verify draws no randomness");

  TrainArgs train;
  auto* sub_train = app.add_subcommand("train", "fit a built-in model");
  sub_train->add_option("--data", train.data)->required();
  sub_train->add_option("--schema", train.schema)->required();
  sub_train->add_option("--model", train.kind, "knn, naive_bayes, decision_tree, logistic_regression, "
                                                "linear_regression, knn_regressor, tree_regressor");
  sub_train->add_option("--seed", train.seed);
  sub_train->add_option("--seed-bundle", train.seed, "base seed");
  sub_train->add_option("--out", train.out);

  std::string serve_model;
  auto* sub_oracle = app.add_subcommand("oracle", "model oracles");
  sub_oracle->require_subcommand(1);
  auto* sub_serve = sub_oracle->add_subcommand("serve", "answer the line protocol on stdin/stdout");
  sub_serve->add_option("--model", serve_model, "model JSON")->required();

  EvalArgs eval;
  auto* sub_eval = app.add_subcommand("eval", "fold and dilution grid over methods and models");
  sub_eval->add_option("--data", eval.data)->required();
  sub_eval->add_option("--schema", eval.schema)->required();
  sub_eval->add_option("--methods", eval.methods, "comma list of ldss, flip, flip_nn");
  sub_eval->add_option("--models", eval.models, "comma list of classifier kinds");
  sub_eval->add_option("--folds", eval.folds);
  sub_eval->add_option("--multipliers", eval.multipliers, "comma list of dilution multipliers");
  sub_eval->add_option("--out", eval.out, "report JSON");
  sub_eval->add_option("--tables", eval.tables, "fidelity table CSV");
  sub_eval->add_option("--security", eval.security, "also write security profiles to this JSON");
  sub_eval->add_flag("--flip-nn-global", eval.flip_nn_global, "flip to the global least frequent label");
  eval.flags.add(sub_eval);

  SecurityArgs security;
  auto* sub_security = app.add_subcommand("security", "k-NN distance and outlier profiles of one run");
  sub_security->add_option("--data", security.data)->required();
  sub_security->add_option("--schema", security.schema)->required();
  sub_security->add_option("--out", security.out);
  sub_security->add_flag("--flip-nn-global", security.flip_nn_global);
  security.flags.add(sub_security);

  FixtureArgs fixture;
  auto* sub_fixture = app.add_subcommand("fixture", "write a built-in dataset");
  sub_fixture->add_option("--kind", fixture.kind, "pet, classification or regression");
  sub_fixture->add_option("--rows", fixture.rows);
  sub_fixture->add_option("--seed", fixture.seed);
  sub_fixture->add_option("--out", fixture.out);
  sub_fixture->add_option("--schema-out", fixture.schema_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    print_error("cli", e.what());
    return kExitError;
  }
  set_warnings_muted(quiet);
  trigger.seed_given = seed_opt->count() > 0;

  try {
    if (*sub_inject) return cmd_inject(inject);
    if (*sub_trigger) return cmd_trigger(trigger);
    if (*sub_verify) return cmd_verify(verify);
    if (*sub_train) return cmd_train(train);
    if (*sub_serve) return cmd_serve(serve_model);
    if (*sub_eval) return cmd_eval(eval);
    if (*sub_security) return cmd_security(security);
    if (*sub_fixture) return cmd_fixture(fixture);
  } catch (const StageError& e) {
    print_error(e.stage, e.what());
    return kExitError;
  } catch (const ProtocolError& e) {
    print_error(g_stage, e.what());
    return kExitProtocol;
  } catch (const std::exception& e) {
    print_error(g_stage, e.what());
    return kExitError;
  }
  return kExitError;
}
