#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ldss/types.hpp"

namespace ldss {

/// Expected path length of an unsuccessful BST search among `n` points.
double average_path_length(double n);

struct IsolationForestOptions {
  std::size_t tree_count = 100;
  std::size_t max_subsample = 256;
};

class IsolationForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;  // points reaching a leaf
  };
  using Tree = std::vector<Node>;

  IsolationForest() = default;
  IsolationForest(std::vector<Tree> trees, std::size_t dims, std::size_t subsample_size, double contamination);

  /// s(x) = 2^(-E[h(x)] / c(psi)).
  double score(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  Eigen::VectorXd scores(const Cloud& points) const;
  /// Strictly above the fitted threshold.
  bool is_outlier(const Eigen::Ref<const Eigen::VectorXd>& p) const;

  void set_threshold(double t) { threshold_ = t; }
  double threshold() const { return threshold_; }
  double contamination() const { return contamination_; }
  std::size_t tree_count() const { return trees_.size(); }
  std::size_t subsample_size() const { return subsample_size_; }
  std::size_t dims() const { return dims_; }

 private:
  double path_length(const Tree& tree, const double* x) const;

  std::vector<Tree> trees_;
  std::size_t dims_ = 0;
  std::size_t subsample_size_ = 0;
  double contamination_ = 0.05;
  double threshold_ = 1.0;
};

/// Fits trees on per-tree substreams of `seed` and sets the threshold to the
/// (1 - contamination) quantile (linear interpolation) of training scores.
IsolationForest fit_iforest(const Cloud& points, double contamination, std::uint64_t seed,
                            const IsolationForestOptions& options = {});

/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace ldss
