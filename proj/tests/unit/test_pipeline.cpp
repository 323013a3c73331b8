#include "doctest.h"

#include <set>

#include "ldss/fixtures.hpp"
#include "ldss/pipeline.hpp"

using namespace ldss;

namespace {

RunConfig quick_config(std::uint64_t base) {
  RunConfig cfg;
  cfg.seeds = SeedBundle::from_base(base);
  return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("seed bundle derives distinct stage seeds") {
    auto s = SeedBundle::from_base(42);
    std::set<std::uint64_t> all = {s.transform, s.forest, s.anneal, s.synth, s.recovery, s.regression, s.shuffle, s.trigger};
    CHECK(all.size() == 8);
    auto back = seeds_from_json(seeds_to_json(s));
    CHECK(back.trigger == s.trigger);
    CHECK(seeds_from_json(nlohmann::json(42)).anneal == s.anneal);
    auto partial = seeds_from_json(nlohmann::json{{"base", 42}, {"trigger", 5}});
    CHECK(partial.trigger == 5);
    CHECK(partial.synth == s.synth);
  }

  TEST_CASE("config json round trip and validation") {
    RunConfig c;
    c.k = 6;
    c.rho = 0.2;
    c.pivots = PivotStrategy::random_rows;
    auto back = config_from_json(config_to_json(c));
    CHECK(back.k == 6);
    CHECK(back.rho == 0.2);
    CHECK(back.pivots == PivotStrategy::random_rows);
    CHECK(config_from_json(nlohmann::json{{"m", 4}}).k == 10);
    CHECK_THROWS(config_from_json(nlohmann::json{{"kk", 4}}));
    RunConfig bad;
    bad.rho = 0;
    CHECK_THROWS(bad.validate());
    bad = RunConfig{};
    bad.tau = 1.5;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("run reports every stage in order") {
    std::vector<std::string> stages;
    run_ldss(synthetic_classification(1000, 1), quick_config(1), [&](std::string_view s) { stages.emplace_back(s); });
    CHECK(stages == std::vector<std::string>{"config", "bind", "transform", "isoforest", "emptyball", "rank", "synth",
                                             "recover", "assemble"});
  }

  TEST_CASE("same seeds give the same modified dataset") {
    auto ds = synthetic_classification(1000, 2);
    auto a = run_ldss(ds, quick_config(9));
    auto b = run_ldss(ds, quick_config(9));
    CHECK(to_csv(a.bundle.d_mod) == to_csv(b.bundle.d_mod));
    CHECK(manifest_to_json(a).dump() == manifest_to_json(b).dump());
    auto c = run_ldss(ds, quick_config(10));
    CHECK(to_csv(a.bundle.d_mod) != to_csv(c.bundle.d_mod));
  }

  TEST_CASE("modified dataset keeps every original row") {
    auto ds = synthetic_classification(1000, 3);
    auto run = run_ldss(ds, quick_config(3));
    const auto& d_mod = run.bundle.d_mod;
    CHECK(d_mod.count(Provenance::original) == ds.size());
    CHECK(d_mod.count(Provenance::injected) == run.per_ball * 10);
    CHECK(d_mod.size() == ds.size() + run.bundle.d_inj.size());
    std::multiset<Row> a(ds.rows.begin(), ds.rows.end()), b;
    for (std::size_t i = 0; i < d_mod.size(); ++i) {
      if (d_mod.provenance[i] == Provenance::original) b.insert(d_mod.rows[i]);
    }
    CHECK(a == b);
  }

  TEST_CASE("manifest restores the owner state") {
    auto ds = synthetic_classification(1000, 4);
    auto run = run_ldss(ds, quick_config(4));
    auto j = nlohmann::json::parse(manifest_to_json(run).dump());
    CHECK(j.at("format") == kManifestFormat);
    auto owner = owner_from_manifest(j);
    CHECK(to_csv(generate_triggers(owner, 11)) == to_csv(generate_triggers(run.owner, 11)));
    j["format"] = "other";
    CHECK_THROWS(owner_from_manifest(j));
  }

  TEST_CASE("regression run carries targets and a reference error") {
    auto ds = synthetic_regression(1000, 5);
    auto cfg = quick_config(5);
    cfg.regression = true;
    auto run = run_ldss(ds, cfg);
    REQUIRE(run.owner.binding);
    CHECK(run.owner.reference_mae > 0);
    CHECK_FALSE(run.bundle.d_mod.is_classification());
    auto trig = generate_triggers(run.owner, 3);
    CHECK_FALSE(trig.is_classification());
    for (std::size_t i = 0; i < trig.size(); ++i) {
      const auto& b = run.owner.plan.balls[i / run.per_ball];
      CHECK(trig.labels[i] == run.owner.binding->intended_target(b.target_class));
    }
    auto owner = owner_from_manifest(manifest_to_json(run));
    CHECK(owner.reference_mae == run.owner.reference_mae);
  }

  TEST_CASE("task and configuration must agree") {
    auto cfg = quick_config(1);
    cfg.regression = true;
    CHECK_THROWS_AS(run_ldss(synthetic_classification(300, 1), cfg), Error);
    cfg.regression = false;
    CHECK_THROWS_AS(run_ldss(synthetic_regression(300, 1), cfg), Error);
  }
}
