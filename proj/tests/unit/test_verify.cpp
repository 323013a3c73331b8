#include "doctest.h"

#include <sstream>

#include "ldss/fixtures.hpp"
#include "ldss/verify.hpp"

using namespace ldss;

TEST_SUITE("verify") {
  TEST_CASE("classification verdict at the threshold") {
    std::vector<std::string> intended = {"a", "b", "a", "a", "b"};
    auto r = verdict_classification({"a", "b", "a", "b", "a"}, intended, 0.6);
    CHECK(r.match_count == 3);
    CHECK(r.trigger_accuracy == doctest::Approx(0.6));
    CHECK(r.leaked);
    CHECK_FALSE(verdict_classification({"a", "a", "a", "b", "a"}, intended, 0.6).leaked);
    CHECK_THROWS_AS(verdict_classification({"a"}, intended, 0.6), ProtocolError);
    CHECK_THROWS_AS(verdict_classification({}, {}, 0.6), Error);
  }

  TEST_CASE("regression verdict against the reference") {
    auto r = verdict_regression({1, 2}, {1.5, 2.5}, 0.2, 0, 10, 0.5);
    CHECK(r.trigger_mae == doctest::Approx(0.05));
    CHECK(r.trigger_mse == doctest::Approx(0.0025));
    CHECK(r.leaked);
    CHECK_FALSE(verdict_regression({1, 2}, {2.5, 3.5}, 0.2, 0, 10, 0.5).leaked);
    CHECK(verdict_regression({0}, {1}, 0.2, 0, 10, 0.5).leaked);  // 0.1 == 0.5 * 0.2
    CHECK_THROWS(verdict_regression({0}, {1}, 0, 0, 10));
  }

  TEST_CASE("verdict is a pure function of its inputs") {
    std::vector<std::string> p = {"x", "y", "x"}, q = {"x", "x", "x"};
    auto a = verdict_classification(p, q, 0.5);
    auto b = verdict_classification(p, q, 0.5);
    CHECK(report_to_json(a) == report_to_json(b));
  }

  TEST_CASE("token splitting") {
    CHECK(split_tokens("a\nb\n") == std::vector<std::string>{"a", "b"});
    CHECK(split_tokens("a\r\nb") == std::vector<std::string>{"a", "b"});
    CHECK(split_tokens("").empty());
    CHECK(parse_real_token("2.5") == 2.5);
    CHECK_THROWS_AS(parse_real_token("2.5x"), ProtocolError);
    CHECK_THROWS_AS(parse_real_token("nan"), ProtocolError);
  }

  TEST_CASE("query checks the reply shape") {
    auto ds = pet_dataset();
    FunctionOracle short_reply([](const TabularDataset&) { return std::vector<std::string>{"yes"}; });
    CHECK_THROWS_AS(query(short_reply, ds), ProtocolError);
    FunctionOracle comma([](const TabularDataset& rows) { return std::vector<std::string>(rows.size(), "a,b"); });
    CHECK_THROWS_AS(query(comma, ds), ProtocolError);
    FunctionOracle fine([](const TabularDataset& rows) { return std::vector<std::string>(rows.size(), "yes"); });
    CHECK(query(fine, ds).size() == 7);
  }

  TEST_CASE("subprocess oracle speaks the line protocol") {
    auto ds = pet_dataset();
    auto echo_species = SubprocessOracle::shell("cut -d, -f2");
    auto tokens = query(echo_species, ds);
    CHECK(tokens == std::vector<std::string>{"Cat", "Cat", "Dog", "Cat", "Dog", "Fox", "Cat"});
    auto failing = SubprocessOracle::shell("cat >/dev/null; exit 3");
    CHECK_THROWS_AS(query(failing, ds), ProtocolError);
    auto silent = SubprocessOracle::shell("cat >/dev/null");
    CHECK_THROWS_AS(query(silent, ds), ProtocolError);
  }

  TEST_CASE("served model answers like the model") {
    auto ds = pet_dataset();
    ModelSpec spec;
    spec.kind = ModelKind::knn;
    spec.knn_k = 1;
    auto model = fit_model(spec, ds, 0);
    std::istringstream in(protocol_input(ds));
    std::ostringstream out;
    serve(*model, in, out);
    CHECK(split_tokens(out.str()) == model->predict_tokens(ds));
  }

  TEST_CASE("protocol lines parse back to rows") {
    auto ds = pet_dataset();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(parse_feature_line(features_to_csv_line(ds, i), ds.schema) == ds.rows[i]);
    }
    CHECK(parse_feature_line("M,Wolf,W,C,3", ds.schema)[1] == -1.0);
    CHECK_THROWS(parse_feature_line("M,Cat,W,C", ds.schema));
    CHECK_THROWS(parse_feature_line("M,Cat,W,C,old", ds.schema));
  }
}
