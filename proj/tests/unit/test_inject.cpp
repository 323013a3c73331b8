#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ldss/fixtures.hpp"
#include "ldss/inject.hpp"
#include "ldss/random.hpp"

using namespace ldss;

namespace {

// Smallest T by linear search, checked with floating point proportions.
std::size_t brute_total(const std::vector<std::size_t>& orig, const std::vector<std::size_t>& inj) {
  const double n = std::accumulate(orig.begin(), orig.end(), 0.0);
  const double a = std::accumulate(inj.begin(), inj.end(), 0.0);
  for (std::size_t t = static_cast<std::size_t>(n + a);; ++t) {
    bool ok = true;
    for (std::size_t c = 0; c < orig.size(); ++c) {
      if (static_cast<double>(t) * orig[c] / n + 1e-9 < orig[c] + inj[c]) ok = false;
    }
    if (ok) return t;
  }
}

TabularDataset skewed_injection(const TabularDataset& d_orig, int cls, std::size_t count) {
  TabularDataset inj = d_orig.empty_like();
  for (std::size_t i = 0; i < count; ++i) inj.push_back(d_orig.rows[i], cls, Provenance::injected);
  return inj;
}

}  // namespace

TEST_SUITE("inject") {
  TEST_CASE("recovery counts match a linear search") {
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t classes = 2 + rng.below(4);
      std::vector<std::size_t> orig(classes), inj(classes);
      for (auto& x : orig) x = 1 + rng.below(200);
      for (auto& x : inj) x = rng.below(40);
      auto add = recovery_counts(orig, inj);
      const std::size_t n = std::accumulate(orig.begin(), orig.end(), std::size_t{0});
      const std::size_t a = std::accumulate(inj.begin(), inj.end(), std::size_t{0});
      const std::size_t total = n + a + std::accumulate(add.begin(), add.end(), std::size_t{0});
      if (a == 0) {
        CHECK(total == n);
        continue;
      }
      CHECK(total == brute_total(orig, inj));
      for (std::size_t c = 0; c < classes; ++c) {
        const double share = static_cast<double>(orig[c] + inj[c] + add[c]) / static_cast<double>(total);
        CHECK(std::abs(share - static_cast<double>(orig[c]) / static_cast<double>(n)) <= 1.0 / static_cast<double>(total) + 1e-12);
      }
    }
  }

  TEST_CASE("injected class absent from the original is rejected") {
    CHECK_THROWS_AS(recovery_counts({5, 0}, {0, 2}), Error);
  }

  TEST_CASE("recovery restores class proportions on a skewed injection") {
    auto d_orig = synthetic_classification(1000, 12);
    auto inj = skewed_injection(d_orig, 2, 100);
    auto rec = recover_distribution(d_orig, inj, {}, 3);
    auto all = concat(concat(d_orig, inj), rec);
    auto h0 = d_orig.class_histogram();
    auto h1 = all.class_histogram();
    for (std::size_t c = 0; c < h0.size(); ++c) {
      const double p0 = static_cast<double>(h0[c]) / static_cast<double>(d_orig.size());
      const double p1 = static_cast<double>(h1[c]) / static_cast<double>(all.size());
      CHECK(std::abs(p0 - p1) <= 0.01);
    }
    CHECK(rec.count(Provenance::recovery) == rec.size());
  }

  TEST_CASE("recovery noise stays within the column range") {
    auto d_orig = synthetic_classification(400, 2);
    auto inj = skewed_injection(d_orig, 0, 60);
    std::vector<std::size_t> donors;
    auto rec = recover_distribution(d_orig, inj, {0.05, 0.2}, 9, &donors);
    REQUIRE(donors.size() == rec.size());
    for (std::size_t f = 0; f < d_orig.dims(); ++f) {
      if (d_orig.schema.features[f].kind != FeatureKind::numerical) continue;
      double lo = 1e300, hi = -1e300;
      for (const auto& r : d_orig.rows) lo = std::min(lo, r[f]), hi = std::max(hi, r[f]);
      for (std::size_t i = 0; i < rec.size(); ++i) {
        CHECK(rec.rows[i][f] >= lo);
        CHECK(rec.rows[i][f] <= hi);
        CHECK(std::abs(rec.rows[i][f] - d_orig.rows[donors[i]][f]) <= 0.05 * (hi - lo) + 0.5);
      }
    }
    for (std::size_t i = 0; i < rec.size(); ++i) CHECK(rec.labels[i] == d_orig.labels[donors[i]]);
  }

  TEST_CASE("quantile binding") {
    auto ds = synthetic_regression(800, 5);
    auto [view, b] = bind_regression(ds, 4);
    CHECK(b.class_count() == 4);
    CHECK(std::is_sorted(b.edges.begin(), b.edges.end()));
    auto hist = view.class_histogram();
    for (auto n : hist) CHECK(n == doctest::Approx(200).epsilon(0.05));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto c = static_cast<std::size_t>(view.class_of(i));
      if (c > 0) CHECK(ds.labels[i] > b.edges[c - 1]);
      if (c < b.edges.size()) CHECK(ds.labels[i] <= b.edges[c]);
    }
    CHECK(b.intended_target(0) < b.intended_target(3));
    CHECK(b.normalize(b.target_min) == 0.0);
    CHECK(b.normalize(b.target_max) == 1.0);
  }

  TEST_CASE("finalized targets are donors of the class") {
    auto ds = synthetic_regression(300, 8);
    auto [view, b] = bind_regression(ds, 4);
    auto out = finalize_regression_labels(view.subset({0, 1, 2, 3, 4, 5}), b, 1);
    CHECK(out.schema.label.task == TaskKind::regression);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& pool = b.donors[static_cast<std::size_t>(view.class_of(i))];
      CHECK(std::find(pool.begin(), pool.end(), out.labels[i]) != pool.end());
    }
    auto back = binding_from_json(binding_to_json(b));
    CHECK(back.edges == b.edges);
    CHECK(back.donors == b.donors);
  }

  TEST_CASE("assemble keeps every row once") {
    auto d_orig = synthetic_classification(200, 1);
    auto inj = skewed_injection(d_orig, 1, 10);
    inj.ids.assign(inj.size(), 0);
    for (std::size_t i = 0; i < inj.size(); ++i) inj.ids[i] = 1000 + i;
    auto bundle = assemble(d_orig, inj, d_orig.empty_like(), 4);
    CHECK(bundle.d_mod.size() == 210);
    auto ids = bundle.d_mod.ids;
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    CHECK(bundle.d_mod.count(Provenance::injected) == 10);
    CHECK(assemble(d_orig, inj, d_orig.empty_like(), 4).d_mod.ids == bundle.d_mod.ids);
  }
}
