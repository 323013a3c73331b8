#include "ldss/emptyball.hpp"

#include <algorithm>

#include "ldss/parallel.hpp"

namespace ldss {

namespace {

// True when every cloud point is strictly farther than sqrt(bound2);
// `out2` then holds the nearest squared distance. Exits on the first
// point at or inside the bound.
bool clears(const Point& c, const Cloud& cloud, double bound2, double& out2) {
  const Eigen::Index m = cloud.cols();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const double* row = cloud.row(i).data();
    double s = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = row[j] - c(j);
      s += d * d;
    }
    if (s <= bound2) return false;
    best = std::min(best, s);
  }
  out2 = best;
  return true;
}

}  // namespace

std::size_t nearest_index(const Point& center, const Cloud& cloud) {
  if (cloud.rows() == 0) throw Error("nearest_index: empty cloud");
  Eigen::Index best = 0;
  (cloud.rowwise() - center.transpose()).rowwise().squaredNorm().minCoeff(&best);
  return static_cast<std::size_t>(best);
}

Point per_dim_std(const Cloud& cloud) {
  if (cloud.rows() == 0) throw Error("per_dim_std: empty cloud");
  const Eigen::RowVectorXd mean = cloud.colwise().mean();
  const Eigen::RowVectorXd var =
      (cloud.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(cloud.rows());
  return var.transpose().array().sqrt();
}

Point perturb(const Point& center, double t, const Point& std_dev, Rng& rng) {
  Point out = center;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += t * rng.uniform(-std_dev(i), std_dev(i));
  return out;
}

std::size_t cooling_epochs(double epsilon, double cooling) {
  if (!(epsilon > 0)) throw Error("cooling_epochs: epsilon must be positive");
  if (!(cooling > 0 && cooling < 1)) throw Error("cooling_epochs: cooling must be in (0, 1)");
  std::size_t epochs = 0;
  for (double t = 1.0; t >= epsilon; t *= cooling) ++epochs;
  return epochs;
}

std::vector<EmptyBall> identify_empty_balls(const Cloud& cloud, const IsolationForest* forest,
                                            const AnnealConfig& cfg, AnnealTrace* trace) {
  if (cloud.rows() == 0) throw Error("identify_empty_balls: empty cloud");
  if (cfg.seed_count == 0) throw Error("identify_empty_balls: seed_count must be positive");
  if (forest && forest->dims() != static_cast<std::size_t>(cloud.cols())) {
    throw Error("identify_empty_balls: forest dimension mismatch");
  }
  const std::size_t epochs = cooling_epochs(cfg.epsilon, cfg.cooling);
  const Point spread = cfg.per_dim_std.size() == 0 ? per_dim_std(cloud) : cfg.per_dim_std;
  if (spread.size() != cloud.cols()) throw Error("identify_empty_balls: per_dim_std has wrong length");

  const auto n = static_cast<std::size_t>(cloud.rows());
  std::vector<std::size_t> seeds;
  {
    Rng pick = Rng::substream(cfg.rng_seed, 0);
    if (n >= cfg.seed_count) {
      seeds = pick.sample_without_replacement(n, cfg.seed_count);
    } else {
      for (std::size_t s = 0; s < cfg.seed_count; ++s) seeds.push_back(pick.below(n));
    }
  }

  std::vector<EmptyBall> balls(cfg.seed_count);
  if (trace) trace->radii.assign(cfg.seed_count, {});

  parallel_for(cfg.seed_count, [&](std::size_t s) {
    Rng rng = Rng::substream(cfg.rng_seed, 1 + s);
    Point center = cloud.row(static_cast<Eigen::Index>(seeds[s])).transpose();
    double r2 = nearest_squared_distance(center, cloud);
    if (trace) trace->radii[s].push_back(std::sqrt(r2));
    double t = 1.0;
    for (std::size_t e = 0; e < epochs; ++e, t *= cfg.cooling) {
      for (std::size_t attempt = 0; attempt < cfg.retry_cap; ++attempt) {
        Point candidate = perturb(center, t, spread, rng);
        if ((candidate.array() < 0.0).any() || (candidate.array() > 1.0).any()) continue;
        double cand2 = 0;
        if (!clears(candidate, cloud, r2, cand2)) continue;
        if (forest && forest->is_outlier(candidate)) continue;
        center = std::move(candidate);
        r2 = cand2;
        if (trace) trace->radii[s].push_back(std::sqrt(r2));
        break;
      }
    }
    balls[s] = EmptyBall{std::move(center), std::sqrt(r2), s};
  });
  return balls;
}

nlohmann::json balls_to_json(const std::vector<EmptyBall>& balls) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : balls) {
    out.push_back({{"center", std::vector<double>(b.center.data(), b.center.data() + b.center.size())},
                   {"radius", b.radius},
                   {"seed_index", b.seed_index}});
  }
  return out;
}

std::vector<EmptyBall> balls_from_json(const nlohmann::json& j) {
  std::vector<EmptyBall> out;
  for (const auto& jb : j) {
    const auto c = jb.at("center").get<std::vector<double>>();
    EmptyBall b;
    b.center = Eigen::Map<const Point>(c.data(), static_cast<Eigen::Index>(c.size()));
    b.radius = jb.at("radius").get<double>();
    b.seed_index = jb.at("seed_index").get<std::size_t>();
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace ldss
