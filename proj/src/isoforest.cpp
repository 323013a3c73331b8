#include "ldss/isoforest.hpp"

#include <algorithm>
#include <cmath>

#include "ldss/dataset.hpp"
#include "ldss/random.hpp"

namespace ldss {

double average_path_length(double n) {
  if (n <= 1) return 0.0;
  if (n <= 2) return 1.0;
  return 2.0 * (std::log(n - 1.0) + 0.5772156649) - 2.0 * (n - 1.0) / n;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

IsolationForest::IsolationForest(std::vector<Tree> trees, std::size_t dims, std::size_t subsample_size,
                                 double contamination)
    : trees_(std::move(trees)), dims_(dims), subsample_size_(subsample_size), contamination_(contamination) {}

double IsolationForest::path_length(const Tree& tree, const double* x) const {
  int node = 0;
  double depth = 0;
  while (tree[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& n = tree[static_cast<std::size_t>(node)];
    node = x[n.feature] < n.split ? n.left : n.right;
    depth += 1;
  }
  return depth + average_path_length(static_cast<double>(tree[static_cast<std::size_t>(node)].size));
}

double IsolationForest::score(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  if (static_cast<std::size_t>(p.size()) != dims_) throw Error("isolation forest: dimension mismatch");
  if (trees_.empty()) throw Error("isolation forest: not fitted");
  double total = 0;
  for (const auto& t : trees_) total += path_length(t, p.data());
  const double mean = total / static_cast<double>(trees_.size());
  return std::pow(2.0, -mean / average_path_length(static_cast<double>(subsample_size_)));
}

Eigen::VectorXd IsolationForest::scores(const Cloud& points) const {
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out(i) = score(points.row(i).transpose());
  return out;
}

bool IsolationForest::is_outlier(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  return score(p) > threshold_;
}

namespace {

void grow(IsolationForest::Tree& tree, const Cloud& points, std::vector<Eigen::Index>& idx, std::size_t begin,
          std::size_t end, int depth, int max_depth, Rng& rng) {
  const std::size_t node_id = tree.size();
  tree.push_back({});
  const std::size_t count = end - begin;
  if (count <= 1 || depth >= max_depth) {
    tree[node_id].size = count;
    return;
  }
  const auto dims = static_cast<std::size_t>(points.cols());
  std::vector<int> candidates;
  std::vector<double> lo(dims), hi(dims);
  for (std::size_t f = 0; f < dims; ++f) {
    double a = points(idx[begin], static_cast<Eigen::Index>(f));
    double b = a;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const double v = points(idx[i], static_cast<Eigen::Index>(f));
      a = std::min(a, v);
      b = std::max(b, v);
    }
    lo[f] = a;
    hi[f] = b;
    if (b > a) candidates.push_back(static_cast<int>(f));
  }
  if (candidates.empty()) {
    tree[node_id].size = count;
    return;
  }
  const int feature = candidates[rng.below(candidates.size())];
  const auto uf = static_cast<std::size_t>(feature);
  double split = rng.uniform(lo[uf], hi[uf]);
  if (split <= lo[uf]) split = std::nextafter(lo[uf], hi[uf]);
  auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                               idx.begin() + static_cast<std::ptrdiff_t>(end),
                               [&](Eigen::Index i) { return points(i, feature) < split; });
  const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
  tree[node_id].feature = feature;
  tree[node_id].split = split;
  tree[node_id].left = static_cast<int>(tree.size());
  grow(tree, points, idx, begin, mid, depth + 1, max_depth, rng);
  tree[node_id].right = static_cast<int>(tree.size());
  grow(tree, points, idx, mid, end, depth + 1, max_depth, rng);
}

}  // namespace

IsolationForest fit_iforest(const Cloud& points, double contamination, std::uint64_t seed,
                            const IsolationForestOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw Error("fit_iforest: need at least two points");
  if (!(contamination > 0 && contamination <= 0.5)) throw Error("fit_iforest: contamination must be in (0, 0.5]");
  if (options.tree_count == 0) throw Error("fit_iforest: tree_count must be positive");
  const std::size_t psi = std::min(options.max_subsample, n);
  const int max_depth = static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));

  std::vector<IsolationForest::Tree> trees(options.tree_count);
  for (std::size_t t = 0; t < options.tree_count; ++t) {
    Rng rng = Rng::substream(seed, t);
    std::vector<Eigen::Index> idx;
    if (psi == n) {
      idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<Eigen::Index>(i);
    } else {
      for (auto i : rng.sample_without_replacement(n, psi)) idx.push_back(static_cast<Eigen::Index>(i));
    }
    grow(trees[t], points, idx, 0, idx.size(), 0, max_depth, rng);
  }

  IsolationForest forest(std::move(trees), static_cast<std::size_t>(points.cols()), psi, contamination);
  const Eigen::VectorXd s = forest.scores(points);
  forest.set_threshold(quantile(std::vector<double>(s.data(), s.data() + s.size()), 1.0 - contamination));
  return forest;
}

}  // namespace ldss
