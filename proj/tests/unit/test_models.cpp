#include "doctest.h"

#include <algorithm>

#include "ldss/fixtures.hpp"
#include "ldss/models.hpp"

using namespace ldss;

namespace {

struct Split {
  TabularDataset train, test;
};

const Split& split() {
  static const Split s = [] {
    auto ds = synthetic_classification(1500, 17);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < ds.size(); ++i) (i % 5 == 0 ? b : a).push_back(i);
    return Split{ds.subset(a), ds.subset(b)};
  }();
  return s;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("classifiers beat the majority rate") {
    const auto& s = split();
    auto hist = s.test.class_histogram();
    const double majority = static_cast<double>(*std::max_element(hist.begin(), hist.end())) / s.test.size();
    for (auto kind : classifier_kinds()) {
      ModelSpec spec;
      spec.kind = kind;
      auto model = fit_model(spec, s.train, 1);
      CAPTURE(to_string(kind));
      CHECK(accuracy(*model, s.test) > majority + 0.1);
    }
  }

  TEST_CASE("json round trip keeps predictions") {
    const auto& s = split();
    for (auto kind : classifier_kinds()) {
      ModelSpec spec;
      spec.kind = kind;
      auto model = fit_model(spec, s.train, 2);
      auto back = model_from_json(nlohmann::json::parse(model->to_json().dump()));
      CAPTURE(to_string(kind));
      CHECK(back->predict(s.test) == model->predict(s.test));
    }
  }

  TEST_CASE("regressors track the target") {
    auto ds = synthetic_regression(1200, 4);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < ds.size(); ++i) (i % 4 == 0 ? b : a).push_back(i);
    auto train = ds.subset(a), test = ds.subset(b);
    double mean = 0;
    for (double y : train.labels) mean += y;
    mean /= train.size();
    double base = 0;
    for (double y : test.labels) base += std::abs(y - mean);
    for (auto kind : regressor_kinds()) {
      ModelSpec spec;
      spec.kind = kind;
      auto model = fit_model(spec, train, 3);
      auto pred = model->predict(test);
      double err = 0;
      for (std::size_t i = 0; i < test.size(); ++i) err += std::abs(pred(static_cast<Eigen::Index>(i)) - test.labels[i]);
      CAPTURE(to_string(kind));
      CHECK(err < 0.8 * base);
      auto back = model_from_json(model->to_json());
      CHECK(back->predict(test) == pred);
    }
  }

  TEST_CASE("one-hot preprocessing ignores unseen categories") {
    auto ds = pet_dataset();
    auto pre = fit_preprocessor(ds);
    Row r = ds.rows[0];
    r[1] = -1;
    auto probe = ds.subset({0});
    probe.rows[0] = r;
    auto x = pre.transform(probe);
    CHECK(x.rows() == 1);
    CHECK(x.cols() == static_cast<Eigen::Index>(pre.width));
    const auto off = static_cast<Eigen::Index>(pre.offset[1]);
    for (std::size_t c = 0; c < pre.cardinality[1]; ++c) CHECK(x(0, off + static_cast<Eigen::Index>(c)) == 0.0);
  }

  TEST_CASE("class tokens are class names") {
    auto ds = pet_dataset();
    ModelSpec spec;
    spec.kind = ModelKind::decision_tree;
    spec.min_leaf = 1;
    auto model = fit_model(spec, ds, 0);
    for (const auto& t : model->predict_tokens(ds)) CHECK((t == "yes" || t == "no"));
    CHECK(model_kind_from_string("knn") == ModelKind::knn);
    CHECK_THROWS(model_kind_from_string("svm"));
  }

  TEST_CASE("training is deterministic per seed") {
    const auto& s = split();
    ModelSpec spec;
    spec.kind = ModelKind::logistic_regression;
    CHECK(fit_model(spec, s.train, 5)->predict(s.test) == fit_model(spec, s.train, 5)->predict(s.test));
  }
}
