#include "doctest.h"

#include <algorithm>
#include <set>

#include "ldss/dataset.hpp"
#include "ldss/fixtures.hpp"

using namespace ldss;

namespace {

Schema small_schema() {
  return parse_schema(nlohmann::json::parse(R"({"columns": [
    {"name": "a", "kind": "numerical"},
    {"name": "y", "kind": "categorical", "label": true},
    {"name": "b", "kind": "categorical"}
  ]})"));
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("label column may sit anywhere") {
    auto ds = parse_csv("a,y,b\n1.5,p,x\n2,q,y\n", small_schema());
    CHECK(ds.size() == 2);
    CHECK(ds.schema.label_column == 1);
    CHECK(ds.rows[0][0] == 1.5);
    CHECK(ds.rows[1][1] == 1.0);
    CHECK(ds.labels[1] == 1.0);
    CHECK(to_csv(ds) == "a,y,b\n1.5,p,x\n2,q,y\n");
  }

  TEST_CASE("quoted fields round trip") {
    auto ds = parse_csv("a,y,b\n1,p,\"x, \"\"quoted\"\"\"\n", small_schema());
    CHECK(ds.schema.features[1].values[0] == "x, \"quoted\"");
    auto again = parse_csv(to_csv(ds), small_schema());
    CHECK(again.schema.features[1].values[0] == "x, \"quoted\"");
  }

  TEST_CASE("header mismatch is rejected") {
    CHECK_THROWS_AS(parse_csv("a,b,y\n1,x,p\n", small_schema()), Error);
    CHECK_THROWS_AS(parse_csv("a,y\n1,p\n", small_schema()), Error);
  }

  TEST_CASE("non-numeric numerical cell is rejected") {
    CHECK_THROWS_AS(parse_csv("a,y,b\nabc,p,x\n", small_schema()), Error);
  }

  TEST_CASE("missing cells are imputed from the same column") {
    set_warnings_muted(true);
    auto ds = parse_csv("a,y,b\n?,p,x\n3,p,\n4,q,z\n", small_schema());
    set_warnings_muted(false);
    CHECK((ds.rows[0][0] == 3.0 || ds.rows[0][0] == 4.0));
    CHECK((ds.rows[1][1] == 0.0 || ds.rows[1][1] == 1.0));
    CHECK(ds.schema.features[1].values.size() == 2);
  }

  TEST_CASE("rows without a label are dropped") {
    set_warnings_muted(true);
    auto ds = parse_csv("a,y,b\n1,,x\n2,q,y\n", small_schema());
    set_warnings_muted(false);
    CHECK(ds.size() == 1);
    CHECK(ds.ids[0] == 0);
    CHECK(ds.labels[0] == 0.0);
  }

  TEST_CASE("concat keeps ids and provenance") {
    auto a = pet_dataset();
    auto b = a.subset({0, 1});
    for (auto& p : b.provenance) p = Provenance::injected;
    auto c = concat(a, b);
    CHECK(c.size() == 9);
    CHECK(c.count(Provenance::injected) == 2);
    CHECK(c.ids[7] == 0);
  }

  TEST_CASE("folds partition the rows evenly") {
    auto plan = make_folds(103, 11, 5);
    std::set<std::size_t> seen;
    std::size_t lo = 1000, hi = 0;
    for (std::size_t f = 0; f < 11; ++f) {
      auto idx = plan.indices(f);
      lo = std::min(lo, idx.size());
      hi = std::max(hi, idx.size());
      seen.insert(idx.begin(), idx.end());
    }
    CHECK(seen.size() == 103);
    CHECK(hi - lo <= 1);
    CHECK(make_folds(103, 11, 5).fold_of == plan.fold_of);
  }

  TEST_CASE("dilution appends extra folds in order") {
    auto a = pet_dataset();
    auto b = a.subset({0});
    auto c = a.subset({1, 2});
    CHECK(dilute(a, {b, c}, 1).size() == 7);
    CHECK(dilute(a, {b, c}, 3).size() == 10);
    CHECK_THROWS_AS(dilute(a, {b}, 3), Error);
  }

  TEST_CASE("schema rejects two label columns") {
    CHECK_THROWS(parse_schema(nlohmann::json::parse(R"({"columns": [
      {"name": "a", "kind": "numerical", "label": true},
      {"name": "y", "kind": "categorical", "label": true}]})")));
  }
}
