#pragma once

// Large empty balls in the embedded space, found by simulated annealing
// with constrained updates: every seed center is repeatedly replaced by a
// perturbed copy that (a) stays in the unit cube, (b) is not an
// isolation-forest outlier and (c) lies strictly farther from the nearest
// embedded point. The perturbation scale
// t starts at 1 and is multiplied by `cooling` until it drops below epsilon.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/isoforest.hpp"
#include "ldss/random.hpp"
#include "ldss/types.hpp"

namespace ldss {

struct EmptyBall {
  Point center;
  double radius = 0;
  std::size_t seed_index = 0;
};

/// Squared distance from `center` to its nearest point in `cloud`.
template <typename Derived>
double nearest_squared_distance(const Eigen::MatrixBase<Derived>& center, const Cloud& cloud) {
  if (cloud.rows() == 0) throw Error("radius: empty cloud");
  if (center.size() != cloud.cols()) throw Error("radius: dimension mismatch");
  const Point c = center;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    best = std::min(best, (cloud.row(i).transpose() - c).squaredNorm());
  }
  return best;
}

/// Radius of the empty ball centered at `center`: the exact Euclidean
/// distance to the nearest cloud point.
template <typename Derived>
double radius(const Eigen::MatrixBase<Derived>& center, const Cloud& cloud) {
  return std::sqrt(nearest_squared_distance(center, cloud));
}

/// Index of the nearest cloud point (lowest index on ties).
std::size_t nearest_index(const Point& center, const Cloud& cloud);

/// Population standard deviation of every column.
Point per_dim_std(const Cloud& cloud);

/// c_i + t * uniform(-std_i, +std_i) per coordinate.
Point perturb(const Point& center, double t, const Point& std_dev, Rng& rng);

/// Number of temperatures visited: t = 1, c, c^2, ... while t >= epsilon.
std::size_t cooling_epochs(double epsilon, double cooling);

struct AnnealConfig {
  std::size_t seed_count = 500;
  double epsilon = 0.01;
  double cooling = 0.8;
  /// Empty means: computed from the cloud.
  Point per_dim_std;
  std::uint64_t rng_seed = 0;
  /// Proposals per seed per temperature before the seed is left unchanged.
  std::size_t retry_cap = 200;
};

/// Accepted radii per seed, recorded when requested.
struct AnnealTrace {
  std::vector<std::vector<double>> radii;
};

/// Runs the search; `forest` may be null to disable the outlier guard.
std::vector<EmptyBall> identify_empty_balls(const Cloud& cloud, const IsolationForest* forest,
                                            const AnnealConfig& cfg, AnnealTrace* trace = nullptr);

nlohmann::json balls_to_json(const std::vector<EmptyBall>& balls);
std::vector<EmptyBall> balls_from_json(const nlohmann::json& j);

}  // namespace ldss
