#include "doctest.h"

#include <cmath>

#include "ldss/isoforest.hpp"
#include "ldss/random.hpp"

using namespace ldss;

namespace {

Cloud gaussian_blob(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Cloud c(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    c(i, 0) = rng.normal(0.5, 0.05);
    c(i, 1) = rng.normal(0.5, 0.05);
  }
  return c;
}

}  // namespace

TEST_SUITE("isoforest") {
  TEST_CASE("average path length") {
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == doctest::Approx(1.0));
    const double harmonic = std::log(255.0) + 0.5772156649015329;
    CHECK(average_path_length(256) == doctest::Approx(2 * harmonic - 2.0 * 255 / 256));
  }

  TEST_CASE("quantile interpolates linearly") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
  }

  TEST_CASE("far points score higher than the core") {
    auto cloud = gaussian_blob(500, 3);
    auto forest = fit_iforest(cloud, 0.05, 7);
    Eigen::Vector2d core(0.5, 0.5), far(0.95, 0.05);
    CHECK(forest.score(far) > forest.score(core));
    CHECK(forest.is_outlier(far));
    CHECK_FALSE(forest.is_outlier(core));
  }

  TEST_CASE("threshold flags about the contamination share") {
    auto cloud = gaussian_blob(1000, 5);
    auto forest = fit_iforest(cloud, 0.1, 2);
    auto s = forest.scores(cloud);
    std::size_t flagged = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) flagged += forest.is_outlier(cloud.row(i).transpose()) ? 1 : 0;
    CHECK(flagged <= 100);
    CHECK(flagged >= 95);
  }

  TEST_CASE("outlier test is strict") {
    auto cloud = gaussian_blob(200, 1);
    auto forest = fit_iforest(cloud, 0.05, 1);
    Eigen::Vector2d p(0.5, 0.5);
    forest.set_threshold(forest.score(p));
    CHECK_FALSE(forest.is_outlier(p));
  }

  TEST_CASE("fixed seed reproduces the forest") {
    auto cloud = gaussian_blob(300, 4);
    auto a = fit_iforest(cloud, 0.05, 9).scores(cloud);
    auto b = fit_iforest(cloud, 0.05, 9).scores(cloud);
    CHECK(a == b);
    CHECK(fit_iforest(cloud, 0.05, 9).subsample_size() == 256);
  }
}
