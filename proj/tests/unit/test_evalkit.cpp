#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "ldss/evalkit.hpp"
#include "ldss/fixtures.hpp"

using namespace ldss;

TEST_SUITE("evalkit") {
  TEST_CASE("flip changes exactly g*h labels") {
    auto ds = synthetic_classification(300, 1);
    auto r = run_flip(ds, 5, 4, 9);
    CHECK(r.flipped.size() == 20);
    CHECK(r.triggers.size() == 20);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) changed += r.modified.labels[i] != ds.labels[i];
    CHECK(changed == 20);
    CHECK(r.modified.count(Provenance::injected) == 20);
    for (std::size_t t = 0; t < r.triggers.size(); ++t) CHECK(r.triggers.labels[t] == r.modified.labels[r.flipped[t]]);
  }

  TEST_CASE("flip-nn relabels whole neighborhoods") {
    auto ds = synthetic_classification(300, 2);
    auto spec = fit_transform(ds, 10, 10, PivotStrategy::value_frequency, 0);
    auto r = run_flip_nn(ds, spec, 1, 8, 4, true);
    REQUIRE(r.flipped.size() == 8);
    const double label = r.modified.labels[r.flipped.front()];
    for (auto i : r.flipped) CHECK(r.modified.labels[i] == label);
    std::vector<int> classes;
    for (std::size_t i = 0; i < ds.size(); ++i) classes.push_back(ds.class_of(i));
    CHECK(static_cast<int>(label) == local_gap(r.flipped, classes, ds.class_count()).first);

    auto global = run_flip_nn(ds, spec, 3, 8, 4, false);
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) all[i] = i;
    const int least = local_gap(all, classes, ds.class_count()).first;
    for (auto i : global.flipped) CHECK(global.modified.class_of(i) == least);
  }

  TEST_CASE("kappa distances by brute force") {
    Rng rng(3);
    Cloud c(40, 3);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) c(i, j) = rng.uniform();
    }
    auto d = knn_distances(c, {1, 4});
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      std::vector<double> all;
      for (Eigen::Index j = 0; j < c.rows(); ++j) {
        if (j != i) all.push_back((c.row(i) - c.row(j)).norm());
      }
      std::sort(all.begin(), all.end());
      CHECK(d[0][static_cast<std::size_t>(i)] == all[0]);
      CHECK(d[1][static_cast<std::size_t>(i)] == all[3]);
    }
    CHECK_THROWS(knn_distances(c, {40}));
  }

  TEST_CASE("summary quartiles") {
    auto s = summarize({4, 1, 3, 2, 5});
    CHECK(s.count == 5);
    CHECK(s.q1 == 2.0);
    CHECK(s.median == 3.0);
    CHECK(s.q3 == 4.0);
  }

  TEST_CASE("profiles group by provenance") {
    Rng rng(1);
    Cloud c(60, 2);
    std::vector<Provenance> prov(60, Provenance::original);
    for (Eigen::Index i = 0; i < 60; ++i) {
      c(i, 0) = rng.uniform();
      c(i, 1) = rng.uniform();
    }
    for (int i = 50; i < 60; ++i) {
      prov[static_cast<std::size_t>(i)] = Provenance::injected;
      c(i, 0) = 5 + i;  // far away
    }
    auto p = knn_distance_profile(c, prov, {1});
    REQUIRE(p.find(Provenance::injected));
    CHECK(p.find(Provenance::injected)->front().median > p.find(Provenance::original)->front().median);
    auto o = outlier_profile(c, prov, {0.1}, 2);
    CHECK(o.injected_pct.front() > 50.0);
    CHECK(o.overall_pct.front() <= 10.0 + 1e-9);
  }

  TEST_CASE("fidelity statistics") {
    auto f = fidelity({0.8, 0.9, 0.7}, {0.78, 0.9, 0.75});
    CHECK(f.mean_orig == doctest::Approx(0.8));
    CHECK(f.aad == doctest::Approx((0.02 + 0 + 0.05) / 3));
    CHECK(f.mad == doctest::Approx(0.05));
    CHECK_THROWS(fidelity({0.8}, {}));
  }

  TEST_CASE("small grid fills every cell") {
    EvalOptions opt;
    opt.folds = 3;
    opt.models = {ModelKind::decision_tree};
    opt.methods = {Method::ldss, Method::flip};
    opt.multipliers = {1, 2};
    opt.config.floor_quantile = 0;  // 300-row training folds
    opt.config.seeds = SeedBundle::from_base(2);
    auto r = run_eval(synthetic_classification(900, 6), opt);
    CHECK(r.cells.size() == 3 * 2 * 2);
    for (const auto& c : r.cells) {
      CAPTURE(c.error);
      CHECK(c.ok);
      CHECK(c.trigger_count > 0);
    }
    CHECK(r.summary.size() == 4);
    auto csv = eval_tables_csv(r);
    CHECK(csv.rfind("model,multiplier,orig_acc_train,orig_acc_test,ldss_acc_train", 0) == 0);
    CHECK(eval_to_json(r).at("format") == "ldss-eval/1");
  }
}
