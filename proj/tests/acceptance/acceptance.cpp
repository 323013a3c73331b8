// Acceptance checks for the primary component. One PASS/FAIL line each;
// the exit status is non-zero when any check fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ldss/emptyball.hpp"
#include "ldss/evalkit.hpp"
#include "ldss/fixtures.hpp"
#include "ldss/inject.hpp"
#include "ldss/models.hpp"
#include "ldss/pipeline.hpp"
#include "ldss/random.hpp"
#include "ldss/synth.hpp"
#include "ldss/transform.hpp"
#include "ldss/verify.hpp"

using namespace ldss;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kBase = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

TabularDataset adult() {
  return load_csv(fs::path(LDSS_TEST_DATA) / "adult_5000.csv", fs::path(LDSS_TEST_DATA) / "adult_schema.json", 0);
}

TabularDataset synthetic() { return synthetic_classification(2000, kBase); }

// --- transform ------------------------------------------------------------

Outcome check_pet_golden() {
  const auto ds = pet_dataset();
  const auto spec = fit_transform(ds, 2, 2, PivotStrategy::value_frequency, 0);
  bool ok = spec.discretizer.bin_count(4) == 3;
  const double ages[] = {2, 3, 5, 7, 8};
  const int bins[] = {0, 0, 1, 2, 2};
  for (int i = 0; i < 5; ++i) ok = ok && spec.discretizer.bin_of(4, ages[i]) == bins[i];

  std::vector<std::string> first;
  for (const auto& e : map_row(ds.rows[0], spec)) first.push_back(describe(e, spec));
  std::sort(first.begin(), first.end());
  std::vector<std::string> want = {"(1, M, 1)", "(1, M, 2)", "(2, Cat, 1)", "(2, Cat, 2)", "(3, W, 1)",
                                   "(3, W, 2)", "(4, C, 1)", "(4, C, 2)", "(5, 3)",     "(5, 4)"};
  std::sort(want.begin(), want.end());
  ok = ok && first == want;

  const std::vector<std::string> table = {
      "(1, F, 1)",   "(1, F, 2)",   "(1, M, 1)",   "(1, M, 2)",   "(2, Cat, 1)", "(2, Cat, 2)", "(2, Dog, 1)",
      "(2, Dog, 2)", "(2, Fox, 1)", "(2, Fox, 2)", "(3, B, 1)",   "(3, B, 2)",   "(3, W, 1)",   "(3, W, 2)",
      "(3, Y, 1)",   "(3, Y, 2)",   "(4, A, 1)",   "(4, A, 2)",   "(4, C, 1)",   "(4, C, 2)",   "(4, G, 1)",
      "(4, G, 2)",   "(5, 1)",      "(5, 2)",      "(5, 3)",      "(5, 4)"};
  std::vector<std::string> universe;
  for (const auto& e : element_universe(spec)) universe.push_back(describe(e, spec));
  ok = ok && universe == table;
  return {ok, "bins, first sample set, " + std::to_string(universe.size()) + "-entry universe"};
}

Outcome check_shared_roundtrip() {
  const int d = 5, k = 2;
  int bad = 0;
  for (int l = 0; l <= 2 * d * k; ++l) {
    const double j = 1.0 - static_cast<double>(l) / static_cast<double>(2 * d * k - l);
    bad += round_half_up(shared_from_jaccard(j, d, k)) != l;
  }
  return {bad == 0, std::to_string(2 * d * k + 1 - bad) + "/" + std::to_string(2 * d * k + 1) + " exact"};
}

// --- synthesis --------------------------------------------------------------

double exhaustive_linf(const KnapsackProblem& p) {
  const std::size_t d = p.items.size(), m = p.target.size();
  std::vector<std::size_t> pick(d, 0);
  double best = 1e300;
  while (true) {
    double worst = 0;
    for (std::size_t j = 0; j < m; ++j) {
      int s = 0;
      for (std::size_t i = 0; i < d; ++i) s += p.items[i][pick[i]][j];
      worst = std::max(worst, std::abs(static_cast<double>(s - p.target[j])));
    }
    best = std::min(best, worst);
    std::size_t i = 0;
    while (i < d && ++pick[i] == p.items[i].size()) pick[i++] = 0;
    if (i == d) return best;
  }
}

Outcome check_knapsack_oracle() {
  Rng rng(kBase);
  int agree = 0;
  for (int t = 0; t < 50; ++t) {
    KnapsackProblem p;
    const std::size_t d = 1 + rng.below(4), m = 1 + rng.below(3);
    const int k = 1 + static_cast<int>(rng.below(5));
    p.items.resize(d);
    for (auto& f : p.items) {
      f.resize(1 + rng.below(3));
      for (auto& w : f) {
        w.resize(m);
        for (auto& x : w) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(k) + 1));
      }
    }
    p.target.resize(m);
    for (auto& x : p.target) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * k) * d + 1));
    p.state_cap = 1000000;
    agree += solve_knapsack(p).ranked.front().linf == exhaustive_linf(p);
  }
  return {agree == 50, std::to_string(agree) + "/50 instances optimal"};
}

Outcome check_empty_ball_geometry() {
  Cloud corners(4, 2);
  corners << 0, 0, 0, 1, 1, 0, 1, 1;
  int good = 0;
  bool exact = true;
  for (std::uint64_t s = 0; s < 10; ++s) {
    AnnealConfig cfg;
    cfg.seed_count = 1;
    cfg.rng_seed = derive_seed(kBase, s);
    const auto balls = identify_empty_balls(corners, nullptr, cfg);
    const auto& b = balls.front();
    good += (b.center - Eigen::Vector2d(0.5, 0.5)).norm() <= 0.05 && std::abs(b.radius - std::sqrt(0.5)) <= 0.05;
    for (const auto& ball : balls) {
      double scan = 1e300;
      for (Eigen::Index i = 0; i < corners.rows(); ++i) scan = std::min(scan, (corners.row(i).transpose() - ball.center).norm());
      exact = exact && std::abs(scan - ball.radius) <= 1e-9;
    }
  }
  return {good >= 9 && exact, std::to_string(good) + "/10 seeds at the center, radii exact: " + (exact ? "yes" : "no")};
}

// --- reliability ------------------------------------------------------------

struct ModelScore {
  ModelKind kind;
  double mod = 0, orig = 0;
};

std::vector<ModelScore> trigger_scores(const TabularDataset& d_orig, const TabularDataset& d_mod,
                                       const TabularDataset& triggers, std::uint64_t seed) {
  std::vector<ModelScore> out;
  const auto kinds = classifier_kinds();
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    ModelSpec spec;
    spec.kind = kinds[i];
    const auto on_mod = fit_model(spec, d_mod, derive_seed(seed, 10 + i));
    const auto on_orig = fit_model(spec, d_orig, derive_seed(seed, 10 + i));
    out.push_back({kinds[i], accuracy(*on_mod, triggers), accuracy(*on_orig, triggers)});
  }
  return out;
}

Outcome reliability_on(const std::string& name, const TabularDataset& d_orig) {
  RunConfig cfg;
  cfg.seeds = SeedBundle::from_base(kBase);
  const auto run = run_ldss(d_orig, cfg);
  const auto triggers = generate_triggers(run.owner, cfg.seeds.trigger);
  int gap_ok = 0, verdict_ok = 0;
  std::string detail = name + ":";
  for (const auto& s : trigger_scores(d_orig, run.bundle.d_mod, triggers, cfg.seeds.base)) {
    gap_ok += s.mod >= 0.8 && s.orig <= 0.2;
    verdict_ok += s.mod >= cfg.tau && s.orig < cfg.tau;
    detail += " " + std::string(to_string(s.kind)) + " " + fmt(s.mod, 2) + "/" + fmt(s.orig, 2);
  }
  detail += " (mod/orig; gap " + std::to_string(gap_ok) + "/4, verdicts " + std::to_string(verdict_ok) + "/4)";
  return {gap_ok >= 3 && verdict_ok == 4, detail};
}

Outcome check_reliability() {
  const auto a = reliability_on("synthetic", synthetic());
  const auto b = reliability_on("adult", adult());
  return {a.pass && b.pass, a.detail + "; " + b.detail};
}

// --- fidelity ---------------------------------------------------------------

Outcome fidelity_on(const std::string& name, const TabularDataset& ds) {
  EvalOptions opt;
  opt.methods = {Method::ldss};
  opt.folds = 11;
  opt.config.seeds = SeedBundle::from_base(kBase);
  // Each training fold holds 1/11 of the rows; see the README.
  opt.config.floor_quantile = 0;
  const auto report = run_eval(ds, opt);
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += !c.ok;
  bool ok = failed == 0;
  std::string detail = name + ":";
  for (const auto& s : report.summary) {
    ok = ok && s.folds_ok == opt.folds && s.test.mad * 100 <= 5.0;
    detail += " " + std::string(to_string(s.model)) + " " + fmt(s.test.mad * 100, 2) + "pp";
  }
  if (failed) detail += " (" + std::to_string(failed) + " failed cells)";
  return {ok, detail};
}

Outcome check_fidelity() {
  const auto a = fidelity_on("synthetic", synthetic());
  const auto b = fidelity_on("adult", adult());
  return {a.pass && b.pass, a.detail + "; " + b.detail};
}

// --- security ---------------------------------------------------------------

struct SecurityPair {
  SecurityReport synthetic, adult;
};

const SecurityPair& security_pair() {
  static const SecurityPair pair = [] {
    RunConfig cfg;
    cfg.seeds = SeedBundle::from_base(kBase);
    return SecurityPair{security_profile(synthetic(), cfg), security_profile(adult(), cfg)};
  }();
  return pair;
}

Outcome dense_on(const std::string& name, const SecurityReport& r) {
  const double inj = r.ldss.find(Provenance::injected)->front().median;
  const double orig = r.ldss.find(Provenance::original)->front().median;
  bool ok = inj >= 0.9 * orig;
  std::string detail = name + ": injected " + fmt(inj) + " vs original " + fmt(orig);
  for (const auto& [method, sums] : r.baselines) {
    ok = ok && inj >= 0.9 * sums.front().median;
    detail += ", " + std::string(to_string(method)) + " " + fmt(sums.front().median);
  }
  return {ok, detail};
}

Outcome check_dense_clusters() {
  const auto a = dense_on("synthetic", security_pair().synthetic);
  const auto b = dense_on("adult", security_pair().adult);
  return {a.pass && b.pass, a.detail + "; " + b.detail + " (median 1-NN)"};
}

Outcome check_outliers() {
  const double a = security_pair().synthetic.outliers.injected_pct.back();
  const double b = security_pair().adult.outliers.injected_pct.back();
  return {a <= 75.0 && b <= 75.0, "flagged at 0.1: synthetic " + fmt(a, 1) + "%, adult " + fmt(b, 1) + "%"};
}

// --- dilution ---------------------------------------------------------------

Outcome check_dilution() {
  const auto d_orig = synthetic();
  RunConfig cfg;
  cfg.seeds = SeedBundle::from_base(kBase);
  const auto run = run_ldss(d_orig, cfg);
  const auto triggers = generate_triggers(run.owner, cfg.seeds.trigger);
  std::vector<TabularDataset> extra;
  for (std::uint64_t i = 0; i < 4; ++i) {
    auto fresh = synthetic_classification(d_orig.size(), derive_seed(kBase, 500 + i));
    fresh.schema = d_orig.schema;
    extra.push_back(std::move(fresh));
  }
  bool ok = true;
  std::string detail;
  for (std::size_t mult : {1, 2, 5}) {
    const auto mod = dilute(run.bundle.d_mod, extra, mult);
    const auto orig = dilute(d_orig, extra, mult);
    int wide = 0;
    detail += (detail.empty() ? "x" : "; x") + std::to_string(mult) + ":";
    for (const auto& s : trigger_scores(orig, mod, triggers, cfg.seeds.base)) {
      wide += s.mod - s.orig >= 0.4;
      detail += " " + fmt(s.mod - s.orig, 2);
    }
    ok = ok && wide >= 3;
  }
  return {ok, "gaps (knn nb dt lr) " + detail};
}

// --- recovery ---------------------------------------------------------------

Outcome check_recovery() {
  const auto d_orig = synthetic();
  TabularDataset inj = d_orig.empty_like();
  // All injected rows carry the rarest class.
  const auto hist = d_orig.class_histogram();
  const int rare = static_cast<int>(std::min_element(hist.begin(), hist.end()) - hist.begin());
  for (std::size_t i = 0; i < 200; ++i) inj.push_back(d_orig.rows[i], rare, Provenance::injected);
  const auto rec = recover_distribution(d_orig, inj, {}, derive_seed(kBase, 5));
  const auto all = concat(concat(d_orig, inj), rec);
  const auto after = all.class_histogram();
  double worst = 0;
  for (std::size_t c = 0; c < hist.size(); ++c) {
    worst = std::max(worst, std::abs(static_cast<double>(hist[c]) / static_cast<double>(d_orig.size()) -
                                     static_cast<double>(after[c]) / static_cast<double>(all.size())));
  }
  return {worst <= 0.01, "max class share shift " + fmt(worst * 100, 3) + "pp with " + std::to_string(rec.size()) +
                             " recovery rows"};
}

// --- regression -------------------------------------------------------------

Outcome check_regression() {
  const auto d_orig = synthetic_regression(2000, kBase);
  RunConfig cfg;
  cfg.regression = true;
  cfg.class_count = 4;
  cfg.seeds = SeedBundle::from_base(kBase);
  const auto run = run_ldss(d_orig, cfg);
  const auto& b = *run.owner.binding;
  const double ref = run.owner.reference_mae;
  const auto triggers = generate_triggers(run.owner, derive_seed(kBase, 900));
  bool ok = true;
  std::string detail = "reference " + fmt(ref, 4) + ":";
  std::size_t i = 0;
  for (ModelKind kind : {ModelKind::tree_regressor, ModelKind::knn_regressor}) {
    ModelSpec spec;
    spec.kind = kind;
    const auto mae = [&](const TabularDataset& train) {
      const auto model = fit_model(spec, train, derive_seed(kBase, 10 + i));
      const Eigen::VectorXd p = model->predict(triggers);
      return normalized_mae(std::vector<double>(p.data(), p.data() + p.size()), triggers.labels, b.target_min,
                            b.target_max);
    };
    const double m = mae(run.bundle.d_mod), o = mae(d_orig);
    ok = ok && m <= 0.5 * ref && o > 0.8 * ref;
    detail += " " + std::string(to_string(kind)) + " mod " + fmt(m / ref, 2) + "x orig " + fmt(o / ref, 2) + "x";
    ++i;
  }
  return {ok, detail};
}

// --- determinism ------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), {LDSS_CLI, "--quiet"});
  return run_process(args, "").exit_code;
}

Outcome check_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("ldss_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto at = [&](const char* name) { return (dir / name).string(); };
  bool ok = cli({"fixture", "--kind", "classification", "--rows", "2000", "--seed", "1", "--out", at("d.csv"),
                 "--schema-out", at("s.json")}) == 0;
  for (const char* tag : {"a", "b"}) {
    ok = ok && cli({"inject", "--data", at("d.csv"), "--schema", at("s.json"), "--out", at((std::string(tag) + ".csv").c_str()),
                    "--manifest", at((std::string(tag) + ".json").c_str()), "--seed-bundle", "1"}) == 0;
  }
  const bool same = ok && slurp(at("a.csv")) == slurp(at("b.csv")) && slurp(at("a.json")) == slurp(at("b.json"));
  ok = ok && cli({"trigger", "--manifest", at("a.json"), "--trigger-seed", "11", "--out", at("t1.csv")}) == 0;
  ok = ok && cli({"trigger", "--manifest", at("a.json"), "--trigger-seed", "12", "--out", at("t2.csv")}) == 0;
  bool differ = false, labels = false;
  if (ok) {
    const Schema schema = load_schema(at("s.json"));
    const auto t1 = load_csv(at("t1.csv"), schema), t2 = load_csv(at("t2.csv"), schema);
    differ = t1.rows != t2.rows;
    labels = t1.labels == t2.labels && t1.size() == t2.size();
  }
  fs::remove_all(dir);
  return {same && differ && labels, std::string("inject byte-identical: ") + (same ? "yes" : "no") +
                                        ", triggers differ: " + (differ ? "yes" : "no") +
                                        ", labels identical: " + (labels ? "yes" : "no")};
}

}  // namespace

int main() {
  set_warnings_muted(true);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"pet golden transform", check_pet_golden},
      {"shared-count roundtrip", check_shared_roundtrip},
      {"knapsack oracle", check_knapsack_oracle},
      {"empty-ball geometry", check_empty_ball_geometry},
      {"reliability gap", check_reliability},
      {"fidelity", check_fidelity},
      {"security dense clusters", check_dense_clusters},
      {"security outliers", check_outliers},
      {"dilution resilience", check_dilution},
      {"distribution recovery", check_recovery},
      {"regression extension", check_regression},
      {"determinism", check_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " -- " << o.detail << " [" << fmt(secs, 1) << "s]"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
