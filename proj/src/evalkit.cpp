#include "ldss/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ldss/emptyball.hpp"
#include "ldss/isoforest.hpp"
#include "ldss/parallel.hpp"
#include "ldss/random.hpp"
#include "ldss/synth.hpp"

namespace ldss {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ldss: return "ldss";
    case Method::flip: return "flip";
    case Method::flip_nn: return "flip_nn";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  if (s == "ldss") return Method::ldss;
  if (s == "flip") return Method::flip;
  if (s == "flip_nn" || s == "flipnn") return Method::flip_nn;
  throw Error("unknown method '" + std::string(s) + "'");
}

namespace {

void check_flip_inputs(const TabularDataset& ds, std::size_t g, std::size_t h) {
  if (!ds.is_classification()) throw Error("flip: needs class labels");
  if (ds.class_count() < 2) throw Error("flip: single-class dataset");
  if (g == 0 || h == 0) throw Error("flip: g and h must be positive");
}

FlipResult collect(TabularDataset modified, const std::vector<std::size_t>& flipped) {
  FlipResult r;
  r.flipped = flipped;
  for (auto i : flipped) modified.provenance[i] = Provenance::injected;
  r.triggers = modified.subset(flipped);
  for (auto& p : r.triggers.provenance) p = Provenance::trigger;
  r.modified = std::move(modified);
  return r;
}

}  // namespace

FlipResult run_flip(const TabularDataset& ds, std::size_t g, std::size_t h, std::uint64_t seed) {
  check_flip_inputs(ds, g, h);
  if (g * h > ds.size()) throw Error("flip: g*h exceeds the dataset size");
  Rng rng(seed);
  const auto chosen = rng.sample_without_replacement(ds.size(), g * h);
  TabularDataset out = ds;
  const auto classes = static_cast<std::uint64_t>(ds.class_count());
  for (auto i : chosen) {
    const auto old = static_cast<std::uint64_t>(ds.class_of(i));
    auto c = rng.below(classes - 1);
    if (c >= old) ++c;
    out.labels[i] = static_cast<double>(c);
  }
  return collect(std::move(out), chosen);
}

FlipResult run_flip_nn(const TabularDataset& ds, const TransformSpec& spec, std::size_t g, std::size_t h,
                       std::uint64_t seed, bool local) {
  check_flip_inputs(ds, g, h);
  if (g > ds.size() || h > ds.size()) throw Error("flip_nn: g and h must not exceed the dataset size");
  const Cloud cloud = embed(ds, spec);
  Rng rng(seed);
  const auto anchors = rng.sample_without_replacement(ds.size(), g);
  std::vector<int> classes(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) classes[i] = ds.class_of(i);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) all[i] = i;
  const int global_target = local_gap(all, classes, ds.class_count()).first;

  TabularDataset out = ds;
  std::vector<std::size_t> flipped;
  std::vector<bool> seen(ds.size(), false);
  for (auto a : anchors) {
    const Point center = cloud.row(static_cast<Eigen::Index>(a)).transpose();
    const auto nb = nearest_indices(center, cloud, h);
    const int target = local ? local_gap(nb, classes, ds.class_count()).first : global_target;
    for (auto i : nb) {
      out.labels[i] = target;
      if (!seen[i]) {
        seen[i] = true;
        flipped.push_back(i);
      }
    }
  }
  return collect(std::move(out), flipped);
}

DistanceSummary summarize(std::vector<double> values) {
  DistanceSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  return s;
}

std::vector<std::vector<double>> knn_distances(const Cloud& cloud, const std::vector<int>& kappas) {
  const auto n = static_cast<std::size_t>(cloud.rows());
  if (kappas.empty()) throw Error("knn_distances: no kappa given");
  const int kmax = *std::max_element(kappas.begin(), kappas.end());
  if (*std::min_element(kappas.begin(), kappas.end()) < 1) throw Error("knn_distances: kappa must be positive");
  if (static_cast<std::size_t>(kmax) >= n) throw Error("knn_distances: kappa must be below the row count");
  std::vector<std::vector<double>> out(kappas.size(), std::vector<double>(n));
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back((cloud.row(static_cast<Eigen::Index>(i)) - cloud.row(static_cast<Eigen::Index>(j))).norm());
    }
    std::partial_sort(d.begin(), d.begin() + kmax, d.end());
    for (std::size_t q = 0; q < kappas.size(); ++q) out[q][i] = d[static_cast<std::size_t>(kappas[q] - 1)];
  });
  return out;
}

const std::vector<DistanceSummary>* KnnProfile::find(Provenance p) const {
  for (const auto& [prov, sums] : groups) {
    if (prov == p) return &sums;
  }
  return nullptr;
}

KnnProfile knn_distance_profile(const Cloud& cloud, const std::vector<Provenance>& provenance,
                                const std::vector<int>& kappas) {
  if (provenance.size() != static_cast<std::size_t>(cloud.rows())) throw Error("knn profile: provenance mismatch");
  const auto dist = knn_distances(cloud, kappas);
  KnnProfile prof;
  prof.kappas = kappas;
  for (Provenance p : {Provenance::original, Provenance::injected, Provenance::recovery, Provenance::trigger}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < provenance.size(); ++i) {
      if (provenance[i] == p) rows.push_back(i);
    }
    if (rows.empty()) continue;
    std::vector<DistanceSummary> sums;
    for (const auto& col : dist) {
      std::vector<double> v;
      for (auto i : rows) v.push_back(col[i]);
      sums.push_back(summarize(std::move(v)));
    }
    prof.groups.emplace_back(p, std::move(sums));
  }
  return prof;
}

OutlierProfile outlier_profile(const Cloud& cloud, const std::vector<Provenance>& provenance,
                               const std::vector<double>& contaminations, std::uint64_t seed) {
  if (provenance.size() != static_cast<std::size_t>(cloud.rows())) throw Error("outlier profile: provenance mismatch");
  const auto injected = static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), Provenance::injected));
  if (injected == 0) throw Error("outlier profile: no injected rows");
  const IsolationForest forest = fit_iforest(cloud, 0.1, seed);
  const Eigen::VectorXd scores = forest.scores(cloud);
  const std::vector<double> all(scores.data(), scores.data() + scores.size());
  OutlierProfile out;
  out.contaminations = contaminations;
  for (double c : contaminations) {
    if (!(c > 0 && c < 1)) throw Error("outlier profile: contamination must be in (0, 1)");
    const double threshold = quantile(all, 1.0 - c);
    std::size_t flagged = 0, flagged_inj = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i] > threshold) {
        ++flagged;
        flagged_inj += provenance[i] == Provenance::injected;
      }
    }
    out.injected_pct.push_back(100.0 * static_cast<double>(flagged_inj) / static_cast<double>(injected));
    out.overall_pct.push_back(100.0 * static_cast<double>(flagged) / static_cast<double>(all.size()));
  }
  return out;
}

Fidelity fidelity(const std::vector<double>& acc_orig, const std::vector<double>& acc_method) {
  if (acc_orig.size() != acc_method.size()) throw Error("fidelity: fold count mismatch");
  Fidelity f;
  if (acc_orig.empty()) return f;
  for (std::size_t i = 0; i < acc_orig.size(); ++i) {
    const double diff = std::abs(acc_orig[i] - acc_method[i]);
    f.mean_orig += acc_orig[i];
    f.mean_method += acc_method[i];
    f.aad += diff;
    f.mad = std::max(f.mad, diff);
  }
  const auto n = static_cast<double>(acc_orig.size());
  f.mean_orig /= n;
  f.mean_method /= n;
  f.aad /= n;
  return f;
}

SecurityReport security_profile(const TabularDataset& d_orig, const RunConfig& cfg, bool flip_nn_local,
                                const std::vector<int>& kappas) {
  const LdssRun run = run_ldss(d_orig, cfg);
  SecurityReport r;
  const TabularDataset& d_mod = run.bundle.d_mod;
  const Cloud cloud = embed(d_mod, run.owner.spec);
  r.ldss = knn_distance_profile(cloud, d_mod.provenance, kappas);
  r.outliers = outlier_profile(cloud, d_mod.provenance, {0.01, 0.05, 0.1}, cfg.seeds.forest);

  if (d_orig.is_classification()) {
    // Baseline rows keep their features, so they are profiled on the
    // original cloud.
    const Cloud base = embed(d_orig, run.owner.spec);
    const auto dist = knn_distances(base, kappas);
    const auto profile_rows = [&](const std::vector<std::size_t>& rows) {
      std::vector<DistanceSummary> sums;
      for (const auto& col : dist) {
        std::vector<double> v;
        for (auto i : rows) v.push_back(col[i]);
        sums.push_back(summarize(std::move(v)));
      }
      return sums;
    };
    const auto flip = run_flip(d_orig, cfg.g, run.per_ball, derive_seed(cfg.seeds.base, 101));
    r.baselines.emplace_back(Method::flip, profile_rows(flip.flipped));
    const auto flip_nn =
        run_flip_nn(d_orig, run.owner.spec, cfg.g, run.per_ball, derive_seed(cfg.seeds.base, 102), flip_nn_local);
    r.baselines.emplace_back(Method::flip_nn, profile_rows(flip_nn.flipped));
  }
  return r;
}

namespace {

nlohmann::json summary_json(const DistanceSummary& s) {
  return {{"count", s.count}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}};
}

nlohmann::json summaries_json(const std::vector<int>& kappas, const std::vector<DistanceSummary>& sums) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t q = 0; q < kappas.size(); ++q) j[std::to_string(kappas[q])] = summary_json(sums[q]);
  return j;
}

}  // namespace

nlohmann::json security_to_json(const SecurityReport& r) {
  nlohmann::json knn = nlohmann::json::object();
  for (const auto& [p, sums] : r.ldss.groups) knn[std::string(to_string(p))] = summaries_json(r.ldss.kappas, sums);
  nlohmann::json base = nlohmann::json::object();
  for (const auto& [m, sums] : r.baselines) base[std::string(to_string(m))] = summaries_json(r.ldss.kappas, sums);
  return {{"knn_distances", knn},
          {"baseline_knn_distances", base},
          {"outliers",
           {{"contaminations", r.outliers.contaminations},
            {"injected_pct", r.outliers.injected_pct},
            {"overall_pct", r.outliers.overall_pct}}}};
}

namespace {

struct MethodOutput {
  TabularDataset d_mod;
  TabularDataset triggers;
};

MethodOutput apply_method(Method method, const TabularDataset& d_orig, const EvalOptions& opt, std::uint64_t seed) {
  RunConfig cfg = opt.config;
  cfg.seeds = SeedBundle::from_base(seed);
  const std::size_t h = per_ball_count(cfg.rho, d_orig.size(), cfg.g);
  switch (method) {
    case Method::ldss: {
      const LdssRun run = run_ldss(d_orig, cfg);
      return {run.bundle.d_mod, generate_triggers(run.owner, cfg.seeds.trigger)};
    }
    case Method::flip: {
      auto r = run_flip(d_orig, cfg.g, h, cfg.seeds.synth);
      return {std::move(r.modified), std::move(r.triggers)};
    }
    case Method::flip_nn: {
      const TransformSpec spec = fit_transform(d_orig, cfg.k, cfg.m, cfg.pivots, cfg.seeds.transform);
      auto r = run_flip_nn(d_orig, spec, cfg.g, h, cfg.seeds.synth, opt.flip_nn_local);
      return {std::move(r.modified), std::move(r.triggers)};
    }
  }
  throw Error("unknown method");
}

double trigger_accuracy(const Model& model, const TabularDataset& triggers) {
  return match_rate(model.predict(triggers), triggers.labels);
}

}  // namespace

EvalReport run_eval(const TabularDataset& ds, const EvalOptions& opt) {
  if (!ds.is_classification()) throw Error("eval: the grid covers classification data only");
  if (opt.methods.empty() || opt.models.empty() || opt.multipliers.empty()) throw Error("eval: empty grid axis");
  for (auto kind : opt.models) {
    if (is_regressor(kind)) throw Error("eval: regressor '" + std::string(to_string(kind)) + "' in a class grid");
  }
  for (auto mult : opt.multipliers) {
    if (mult == 0 || mult > opt.folds - 1) throw Error("eval: multiplier must be in [1, folds - 1]");
  }
  opt.config.validate();
  const std::uint64_t base = opt.config.seeds.base;
  const FoldPlan plan = make_folds(ds, opt.folds, derive_seed(base, 1000));

  std::vector<std::vector<EvalCell>> per_fold(opt.folds);
  parallel_for(opt.folds, [&](std::size_t fold) {
    const TabularDataset d_orig = ds.subset(plan.indices(fold));
    const TabularDataset test = ds.subset(plan.indices((fold + 1) % opt.folds));
    std::vector<TabularDataset> extras;
    for (std::size_t s = 2; s < opt.folds; ++s) extras.push_back(ds.subset(plan.indices((fold + s) % opt.folds)));
    const std::uint64_t fold_seed = derive_seed(base, 2000 + fold);

    // Models trained on the diluted original data are shared by all methods.
    std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Model>> orig_models;
    std::map<std::pair<std::size_t, std::size_t>, double> orig_train_acc;
    std::map<std::pair<std::size_t, std::size_t>, std::string> orig_error;
    for (std::size_t mi = 0; mi < opt.models.size(); ++mi) {
      for (std::size_t x = 0; x < opt.multipliers.size(); ++x) {
        try {
          const TabularDataset train = dilute(d_orig, extras, opt.multipliers[x]);
          ModelSpec spec;
          spec.kind = opt.models[mi];
          auto model = fit_model(spec, train, derive_seed(fold_seed, 10 + mi));
          orig_train_acc[{mi, x}] = accuracy(*model, train);
          orig_models[{mi, x}] = std::move(model);
        } catch (const std::exception& e) {
          orig_error[{mi, x}] = e.what();
        }
      }
    }

    auto& cells = per_fold[fold];
    for (std::size_t me = 0; me < opt.methods.size(); ++me) {
      std::optional<MethodOutput> out;
      std::string method_error;
      try {
        out = apply_method(opt.methods[me], d_orig, opt, derive_seed(fold_seed, 1 + me));
      } catch (const std::exception& e) {
        method_error = e.what();
      }
      for (std::size_t mi = 0; mi < opt.models.size(); ++mi) {
        for (std::size_t x = 0; x < opt.multipliers.size(); ++x) {
          EvalCell cell;
          cell.method = opt.methods[me];
          cell.model = opt.models[mi];
          cell.fold = fold;
          cell.multiplier = opt.multipliers[x];
          try {
            if (!method_error.empty()) throw Error(method_error);
            if (orig_error.count({mi, x})) throw Error(orig_error.at({mi, x}));
            const Model& orig = *orig_models.at({mi, x});
            const TabularDataset train = dilute(out->d_mod, extras, opt.multipliers[x]);
            ModelSpec spec;
            spec.kind = opt.models[mi];
            const auto model = fit_model(spec, train, derive_seed(fold_seed, 10 + mi));
            cell.trigger_count = out->triggers.size();
            cell.train_acc_orig = orig_train_acc.at({mi, x});
            cell.test_acc_orig = accuracy(orig, test);
            cell.train_acc_mod = accuracy(*model, train);
            cell.test_acc_mod = accuracy(*model, test);
            cell.trigger_acc_orig = trigger_accuracy(orig, out->triggers);
            cell.trigger_acc_mod = trigger_accuracy(*model, out->triggers);
            cell.ok = true;
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  });

  EvalReport report;
  report.options = opt;
  for (std::size_t me = 0; me < opt.methods.size(); ++me) {
    for (std::size_t mi = 0; mi < opt.models.size(); ++mi) {
      for (std::size_t fold = 0; fold < opt.folds; ++fold) {
        for (const auto& c : per_fold[fold]) {
          if (c.method == opt.methods[me] && c.model == opt.models[mi]) report.cells.push_back(c);
        }
      }
    }
  }
  report.summary = summarize_cells(report.cells);
  return report;
}

std::vector<EvalSummary> summarize_cells(const std::vector<EvalCell>& cells) {
  std::vector<EvalSummary> out;
  std::vector<std::tuple<Method, ModelKind, std::size_t>> keys;
  for (const auto& c : cells) {
    const auto key = std::make_tuple(c.method, c.model, c.multiplier);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [method, model, mult] : keys) {
    std::vector<double> tr_o, tr_m, te_o, te_m;
    EvalSummary s;
    s.method = method;
    s.model = model;
    s.multiplier = mult;
    for (const auto& c : cells) {
      if (!c.ok || c.method != method || c.model != model || c.multiplier != mult) continue;
      tr_o.push_back(c.train_acc_orig);
      tr_m.push_back(c.train_acc_mod);
      te_o.push_back(c.test_acc_orig);
      te_m.push_back(c.test_acc_mod);
      s.trigger_acc_orig += c.trigger_acc_orig;
      s.trigger_acc_mod += c.trigger_acc_mod;
    }
    s.folds_ok = tr_o.size();
    if (s.folds_ok > 0) {
      s.trigger_acc_orig /= static_cast<double>(s.folds_ok);
      s.trigger_acc_mod /= static_cast<double>(s.folds_ok);
    }
    s.train = fidelity(tr_o, tr_m);
    s.test = fidelity(te_o, te_m);
    out.push_back(s);
  }
  return out;
}

namespace {

nlohmann::json fidelity_json(const Fidelity& f) {
  return {{"acc_orig", f.mean_orig}, {"acc", f.mean_method}, {"aad", f.aad}, {"mad", f.mad}};
}

}  // namespace

nlohmann::json eval_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["format"] = "ldss-eval/1";
  std::vector<std::string> methods, models;
  for (auto m : r.options.methods) methods.emplace_back(to_string(m));
  for (auto m : r.options.models) models.emplace_back(to_string(m));
  j["methods"] = methods;
  j["models"] = models;
  j["folds"] = r.options.folds;
  j["multipliers"] = r.options.multipliers;
  j["flip_nn_local"] = r.options.flip_nn_local;
  j["config"] = config_to_json(r.options.config);
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json jc = {{"method", to_string(c.method)},
                         {"model", to_string(c.model)},
                         {"fold", c.fold},
                         {"multiplier", c.multiplier},
                         {"ok", c.ok}};
    if (c.ok) {
      jc["trigger_count"] = c.trigger_count;
      jc["train_acc_orig"] = c.train_acc_orig;
      jc["test_acc_orig"] = c.test_acc_orig;
      jc["train_acc_mod"] = c.train_acc_mod;
      jc["test_acc_mod"] = c.test_acc_mod;
      jc["trigger_acc_orig"] = c.trigger_acc_orig;
      jc["trigger_acc_mod"] = c.trigger_acc_mod;
    } else {
      jc["error"] = c.error;
    }
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : r.summary) {
    summary.push_back({{"method", to_string(s.method)},
                       {"model", to_string(s.model)},
                       {"multiplier", s.multiplier},
                       {"folds_ok", s.folds_ok},
                       {"train", fidelity_json(s.train)},
                       {"test", fidelity_json(s.test)},
                       {"trigger_acc_orig", s.trigger_acc_orig},
                       {"trigger_acc_mod", s.trigger_acc_mod}});
  }
  j["summary"] = std::move(summary);
  return j;
}

std::string eval_tables_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "model,multiplier,orig_acc_train,orig_acc_test";
  for (auto m : r.options.methods) {
    for (const char* split : {"train", "test"}) {
      for (const char* metric : {"acc", "aad", "mad"}) os << ',' << to_string(m) << '_' << metric << '_' << split;
    }
  }
  os << '\n';
  for (auto model : r.options.models) {
    for (auto mult : r.options.multipliers) {
      const EvalSummary* first = nullptr;
      std::vector<const EvalSummary*> row;
      for (auto m : r.options.methods) {
        const EvalSummary* found = nullptr;
        for (const auto& s : r.summary) {
          if (s.method == m && s.model == model && s.multiplier == mult) found = &s;
        }
        if (!first && found && found->folds_ok > 0) first = found;
        row.push_back(found);
      }
      os << to_string(model) << ',' << mult << ',';
      if (first) {
        os << 100 * first->train.mean_orig << ',' << 100 * first->test.mean_orig;
      } else {
        os << ',';
      }
      for (const auto* s : row) {
        for (const Fidelity* f : {s ? &s->train : nullptr, s ? &s->test : nullptr}) {
          if (s && s->folds_ok > 0) {
            os << ',' << 100 * f->mean_method << ',' << 100 * f->aad << ',' << 100 * f->mad;
          } else {
            os << ",,,";
          }
        }
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace ldss
