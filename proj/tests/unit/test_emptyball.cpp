#include "doctest.h"

#include <cmath>

#include "ldss/emptyball.hpp"
#include "ldss/isoforest.hpp"

using namespace ldss;

namespace {

Cloud random_cloud(std::size_t n, std::size_t dims, std::uint64_t seed) {
  Rng rng(seed);
  Cloud c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = rng.uniform();
  }
  return c;
}

double scan_radius(const Point& c, const Cloud& cloud) {
  double best = 1e300;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    double s = 0;
    for (Eigen::Index j = 0; j < cloud.cols(); ++j) s += (cloud(i, j) - c(j)) * (cloud(i, j) - c(j));
    best = std::min(best, std::sqrt(s));
  }
  return best;
}

}  // namespace

TEST_SUITE("emptyball") {
  TEST_CASE("cooling epochs") {
    CHECK(cooling_epochs(0.01, 0.8) == 21);
    CHECK(cooling_epochs(0.5, 0.5) == 2);
    CHECK_THROWS_AS(cooling_epochs(0.01, 1.0), Error);
  }

  TEST_CASE("unit square corners give the central ball") {
    Cloud corners(4, 2);
    corners << 0, 0, 0, 1, 1, 0, 1, 1;
    AnnealConfig cfg;
    cfg.seed_count = 4;
    cfg.rng_seed = 3;
    auto balls = identify_empty_balls(corners, nullptr, cfg);
    for (const auto& b : balls) {
      CHECK((b.center - Eigen::Vector2d(0.5, 0.5)).norm() < 0.05);
      CHECK(b.radius == doctest::Approx(std::sqrt(0.5)).epsilon(0.05));
    }
  }

  TEST_CASE("radius equals the nearest distance by linear scan") {
    auto cloud = random_cloud(200, 3, 8);
    AnnealConfig cfg;
    cfg.seed_count = 20;
    cfg.rng_seed = 1;
    for (const auto& b : identify_empty_balls(cloud, nullptr, cfg)) {
      CHECK(std::abs(b.radius - scan_radius(b.center, cloud)) < 1e-9);
    }
  }

  TEST_CASE("best ball matches a grid search") {
    auto cloud = random_cloud(25, 2, 21);
    double grid_best = 0;
    const int steps = 400;
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= steps; ++j) {
        Eigen::Vector2d c(static_cast<double>(i) / steps, static_cast<double>(j) / steps);
        grid_best = std::max(grid_best, scan_radius(c, cloud));
      }
    }
    AnnealConfig cfg;
    cfg.seed_count = 25;
    cfg.epsilon = 1e-3;
    cfg.rng_seed = 5;
    double sa_best = 0;
    for (const auto& b : identify_empty_balls(cloud, nullptr, cfg)) sa_best = std::max(sa_best, b.radius);
    const double grid_slack = std::sqrt(2.0) / (2.0 * steps);
    CHECK(sa_best <= grid_best + grid_slack + 1e-12);
    CHECK(sa_best >= grid_best - 0.01);
  }

  TEST_CASE("radii never decrease and centers stay in the cube") {
    auto cloud = random_cloud(300, 4, 2);
    auto forest = fit_iforest(cloud, 0.05, 3);
    AnnealConfig cfg;
    cfg.seed_count = 30;
    cfg.rng_seed = 4;
    AnnealTrace trace;
    auto balls = identify_empty_balls(cloud, &forest, cfg, &trace);
    REQUIRE(trace.radii.size() == balls.size());
    for (std::size_t s = 0; s < balls.size(); ++s) {
      const auto& r = trace.radii[s];
      for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] > r[i - 1]);
      CHECK(balls[s].radius >= r.front());
      CHECK(balls[s].center.minCoeff() >= 0.0);
      CHECK(balls[s].center.maxCoeff() <= 1.0);
      if (r.size() > 1) CHECK_FALSE(forest.is_outlier(balls[s].center));
    }
  }

  TEST_CASE("fixed seed reproduces the balls") {
    auto cloud = random_cloud(100, 3, 6);
    AnnealConfig cfg;
    cfg.seed_count = 10;
    cfg.rng_seed = 12;
    auto a = identify_empty_balls(cloud, nullptr, cfg);
    auto b = identify_empty_balls(cloud, nullptr, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].center == b[i].center);
      CHECK(a[i].radius == b[i].radius);
    }
    auto j = balls_from_json(balls_to_json(a));
    CHECK(j[3].radius == a[3].radius);
  }

  TEST_CASE("perturbation stays within t times the spread") {
    Rng rng(1);
    Point c = Point::Constant(3, 0.5);
    Point sd(3);
    sd << 0.1, 0.2, 0.3;
    for (int i = 0; i < 200; ++i) {
      Point p = perturb(c, 0.5, sd, rng);
      for (int j = 0; j < 3; ++j) CHECK(std::abs(p(j) - 0.5) <= 0.5 * sd(j));
    }
  }
}
