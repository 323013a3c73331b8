#include "ldss/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "ldss/random.hpp"

namespace ldss {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::pair<ModelKind, std::string_view> kKindNames[] = {
    {ModelKind::knn, "knn"},
    {ModelKind::naive_bayes, "naive_bayes"},
    {ModelKind::decision_tree, "decision_tree"},
    {ModelKind::logistic_regression, "logistic_regression"},
    {ModelKind::linear_regression, "linear_regression"},
    {ModelKind::knn_regressor, "knn_regressor"},
    {ModelKind::tree_regressor, "tree_regressor"},
};

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw Error("model: matrix row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto r = data[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != cols) throw Error("model: matrix column count mismatch");
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = r[static_cast<std::size_t>(j2)];
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json preprocessor_to_json(const Preprocessor& p) {
  std::vector<std::string> kinds;
  for (auto k : p.kinds) kinds.emplace_back(to_string(k));
  return {{"kinds", kinds}, {"cardinality", p.cardinality}, {"lo", p.lo}, {"hi", p.hi}};
}

Preprocessor preprocessor_from_json(const nlohmann::json& j) {
  Preprocessor p;
  for (const auto& k : j.at("kinds").get<std::vector<std::string>>()) {
    p.kinds.push_back(k == "categorical" ? FeatureKind::categorical : FeatureKind::numerical);
  }
  p.cardinality = j.at("cardinality").get<std::vector<std::size_t>>();
  p.lo = j.at("lo").get<std::vector<double>>();
  p.hi = j.at("hi").get<std::vector<double>>();
  for (std::size_t f = 0; f < p.kinds.size(); ++f) {
    p.offset.push_back(p.width);
    p.width += p.kinds[f] == FeatureKind::categorical ? p.cardinality[f] : 1;
  }
  return p;
}

int argmax_lowest(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

// Indices of the k nearest training rows, nearest first, ties by index.
std::vector<Eigen::Index> nearest_rows(const RowMatrix& train, const Eigen::RowVectorXd& q, int k) {
  const Eigen::VectorXd d2 = (train.rowwise() - q).rowwise().squaredNorm();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(train.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return d2(a) != d2(b) ? d2(a) < d2(b) : a < b; });
  idx.resize(kk);
  return idx;
}

class PreprocessedModel : public Model {
 protected:
  PreprocessedModel(ModelSpec spec, Schema schema, Preprocessor pre)
      : Model(std::move(spec), std::move(schema)), pre_(std::move(pre)) {}
  nlohmann::json base_json() const { return {{"preprocessor", preprocessor_to_json(pre_)}}; }

  Preprocessor pre_;
};

class KnnModel final : public PreprocessedModel {
 public:
  KnnModel(ModelSpec spec, Schema schema, Preprocessor pre, RowMatrix x, Eigen::VectorXd y)
      : PreprocessedModel(std::move(spec), std::move(schema), std::move(pre)), x_(std::move(x)), y_(std::move(y)) {}

  Eigen::VectorXd predict(const TabularDataset& rows) const override {
    const Eigen::MatrixXd q = pre_.transform(rows);
    Eigen::VectorXd out(q.rows());
    const bool regress = is_regressor(spec_.kind);
    const std::size_t classes = schema_.label.classes.size();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const auto nn = nearest_rows(x_, q.row(i), spec_.knn_k);
      if (regress) {
        double sum = 0;
        for (auto j : nn) sum += y_(j);
        out(i) = sum / static_cast<double>(nn.size());
        continue;
      }
      std::vector<std::size_t> votes(classes, 0);
      for (auto j : nn) ++votes[static_cast<std::size_t>(y_(j))];
      const std::size_t top = *std::max_element(votes.begin(), votes.end());
      // Among tied classes, the one owning the nearest neighbor wins.
      for (auto j : nn) {
        if (votes[static_cast<std::size_t>(y_(j))] == top) {
          out(i) = y_(j);
          break;
        }
      }
    }
    return out;
  }

  nlohmann::json params_to_json() const override {
    auto j = base_json();
    j["x"] = matrix_to_json(x_);
    j["y"] = vector_to_json(y_);
    return j;
  }

 private:
  RowMatrix x_;
  Eigen::VectorXd y_;
};

struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;
};

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool classify, std::size_t classes,
              const ModelSpec& spec)
      : x_(x), y_(y), classify_(classify), classes_(classes), spec_(spec) {}

  std::vector<TreeNode> build() {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(x_.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  // Total impurity (gini * n or SSE) and the leaf value of a node.
  std::pair<double, double> summarize(const std::vector<Eigen::Index>& idx) const {
    const auto n = static_cast<double>(idx.size());
    if (classify_) {
      std::vector<double> counts(classes_, 0);
      for (auto i : idx) counts[static_cast<std::size_t>(y_(i))] += 1;
      double sq = 0;
      for (double c : counts) sq += c * c;
      const auto top = std::max_element(counts.begin(), counts.end()) - counts.begin();
      return {n - sq / n, static_cast<double>(top)};
    }
    double s = 0, s2 = 0;
    for (auto i : idx) {
      s += y_(i);
      s2 += y_(i) * y_(i);
    }
    return {std::max(0.0, s2 - s * s / n), s / n};
  }

  int grow(std::vector<Eigen::Index>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const auto [impurity, value] = summarize(idx);
    nodes_[static_cast<std::size_t>(id)].value = value;
    const std::size_t n = idx.size();
    if (depth >= spec_.max_depth || n < 2 * spec_.min_leaf || impurity <= 1e-12) return id;

    int best_f = -1;
    double best_t = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, Eigen::Index>> col(n);
    std::vector<double> left_counts(classes_), right_counts(classes_);
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      for (std::size_t r = 0; r < n; ++r) col[r] = {x_(idx[r], f), idx[r]};
      std::sort(col.begin(), col.end());
      if (col.front().first == col.back().first) continue;
      double ls = 0, ls2 = 0, rs = 0, rs2 = 0;
      if (classify_) {
        std::fill(left_counts.begin(), left_counts.end(), 0.0);
        std::fill(right_counts.begin(), right_counts.end(), 0.0);
        for (const auto& c : col) right_counts[static_cast<std::size_t>(y_(c.second))] += 1;
      } else {
        for (const auto& c : col) {
          rs += y_(c.second);
          rs2 += y_(c.second) * y_(c.second);
        }
      }
      double lsq = 0, rsq = 0;
      if (classify_) {
        for (double c : right_counts) rsq += c * c;
      }
      for (std::size_t pos = 1; pos < n; ++pos) {
        const double yv = y_(col[pos - 1].second);
        if (classify_) {
          const auto c = static_cast<std::size_t>(yv);
          lsq += 2 * left_counts[c] + 1;
          rsq -= 2 * right_counts[c] - 1;
          left_counts[c] += 1;
          right_counts[c] -= 1;
        } else {
          ls += yv;
          ls2 += yv * yv;
          rs -= yv;
          rs2 -= yv * yv;
        }
        if (pos < spec_.min_leaf || n - pos < spec_.min_leaf) continue;
        if (col[pos - 1].first == col[pos].first) continue;
        const auto nl = static_cast<double>(pos), nr = static_cast<double>(n - pos);
        const double cost = classify_ ? (nl - lsq / nl) + (nr - rsq / nr)
                                      : std::max(0.0, ls2 - ls * ls / nl) + std::max(0.0, rs2 - rs * rs / nr);
        if (cost < best_cost - 1e-12) {
          best_cost = cost;
          best_f = static_cast<int>(f);
          best_t = 0.5 * (col[pos - 1].first + col[pos].first);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (auto i : idx) (x_(i, best_f) <= best_t ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    nodes_[static_cast<std::size_t>(id)].feature = best_f;
    nodes_[static_cast<std::size_t>(id)].threshold = best_t;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  bool classify_;
  std::size_t classes_;
  const ModelSpec& spec_;
  std::vector<TreeNode> nodes_;
};

class TreeModel final : public PreprocessedModel {
 public:
  TreeModel(ModelSpec spec, Schema schema, Preprocessor pre, std::vector<TreeNode> nodes)
      : PreprocessedModel(std::move(spec), std::move(schema), std::move(pre)), nodes_(std::move(nodes)) {}

  Eigen::VectorXd predict(const TabularDataset& rows) const override {
    const Eigen::MatrixXd q = pre_.transform(rows);
    Eigen::VectorXd out(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      std::size_t node = 0;
      while (nodes_[node].feature >= 0) {
        const auto& nd = nodes_[node];
        node = static_cast<std::size_t>(q(i, nd.feature) <= nd.threshold ? nd.left : nd.right);
      }
      out(i) = nodes_[node].value;
    }
    return out;
  }

  nlohmann::json params_to_json() const override {
    auto j = base_json();
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes_) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    return j;
  }

  static std::vector<TreeNode> nodes_from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j) {
      nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                       n.at(4).get<double>()});
    }
    const auto count = static_cast<int>(nodes.size());
    for (const auto& n : nodes) {
      if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count)) {
        throw Error("model: malformed tree");
      }
    }
    if (nodes.empty()) throw Error("model: empty tree");
    return nodes;
  }

 private:
  std::vector<TreeNode> nodes_;
};

class LogisticModel final : public PreprocessedModel {
 public:
  LogisticModel(ModelSpec spec, Schema schema, Preprocessor pre, Eigen::MatrixXd w, Eigen::VectorXd b)
      : PreprocessedModel(std::move(spec), std::move(schema), std::move(pre)), w_(std::move(w)), b_(std::move(b)) {}

  Eigen::VectorXd predict(const TabularDataset& rows) const override {
    const Eigen::MatrixXd logits = (pre_.transform(rows) * w_).rowwise() + b_.transpose();
    Eigen::VectorXd out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) out(i) = argmax_lowest(logits.row(i).transpose());
    return out;
  }

  nlohmann::json params_to_json() const override {
    auto j = base_json();
    j["w"] = matrix_to_json(w_);
    j["b"] = vector_to_json(b_);
    return j;
  }

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd b_;
};

class LinearModel final : public PreprocessedModel {
 public:
  LinearModel(ModelSpec spec, Schema schema, Preprocessor pre, Eigen::VectorXd beta)
      : PreprocessedModel(std::move(spec), std::move(schema), std::move(pre)), beta_(std::move(beta)) {}

  Eigen::VectorXd predict(const TabularDataset& rows) const override {
    const Eigen::MatrixXd x = pre_.transform(rows);
    return (x * beta_.head(x.cols())).array() + beta_(x.cols());
  }

  nlohmann::json params_to_json() const override {
    auto j = base_json();
    j["beta"] = vector_to_json(beta_);
    return j;
  }

 private:
  Eigen::VectorXd beta_;
};

class NaiveBayesModel final : public Model {
 public:
  struct Params {
    std::vector<FeatureKind> kinds;
    Eigen::VectorXd log_prior;  // -inf for classes absent from training
    // log_prob[f] is classes x cardinality (categorical features).
    std::vector<Eigen::MatrixXd> log_prob;
    // mean and var are classes x features (numerical features only).
    Eigen::MatrixXd mean, var;
  };

  NaiveBayesModel(ModelSpec spec, Schema schema, Params p)
      : Model(std::move(spec), std::move(schema)), p_(std::move(p)) {}

  Eigen::VectorXd predict(const TabularDataset& rows) const override {
    const auto classes = p_.log_prior.size();
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Eigen::VectorXd score = p_.log_prior;
      for (Eigen::Index c = 0; c < classes; ++c) {
        if (!std::isfinite(score(c))) continue;
        for (std::size_t f = 0; f < p_.kinds.size(); ++f) {
          const double v = rows.rows[i][f];
          const auto fi = static_cast<Eigen::Index>(f);
          if (p_.kinds[f] == FeatureKind::categorical) {
            const auto& lp = p_.log_prob[f];
            if (v >= 0 && v < static_cast<double>(lp.cols())) score(c) += lp(c, static_cast<Eigen::Index>(v));
          } else {
            const double var = p_.var(c, fi);
            const double diff = v - p_.mean(c, fi);
            score(c) += -0.5 * std::log(2 * M_PI * var) - diff * diff / (2 * var);
          }
        }
      }
      out(static_cast<Eigen::Index>(i)) = argmax_lowest(score);
    }
    return out;
  }

  nlohmann::json params_to_json() const override {
    nlohmann::json j;
    std::vector<std::string> kinds;
    for (auto k : p_.kinds) kinds.emplace_back(to_string(k));
    j["kinds"] = kinds;
    std::vector<nlohmann::json> prior;
    for (Eigen::Index c = 0; c < p_.log_prior.size(); ++c) {
      prior.push_back(std::isfinite(p_.log_prior(c)) ? nlohmann::json(p_.log_prior(c)) : nlohmann::json(nullptr));
    }
    j["log_prior"] = prior;
    auto& lp = j["log_prob"] = nlohmann::json::array();
    for (const auto& m : p_.log_prob) lp.push_back(matrix_to_json(m));
    j["mean"] = matrix_to_json(p_.mean);
    j["var"] = matrix_to_json(p_.var);
    return j;
  }

  static Params params_from_json(const nlohmann::json& j) {
    Params p;
    for (const auto& k : j.at("kinds").get<std::vector<std::string>>()) {
      p.kinds.push_back(k == "categorical" ? FeatureKind::categorical : FeatureKind::numerical);
    }
    const auto& prior = j.at("log_prior");
    p.log_prior.resize(static_cast<Eigen::Index>(prior.size()));
    for (std::size_t c = 0; c < prior.size(); ++c) {
      p.log_prior(static_cast<Eigen::Index>(c)) =
          prior[c].is_null() ? -std::numeric_limits<double>::infinity() : prior[c].get<double>();
    }
    for (const auto& m : j.at("log_prob")) p.log_prob.push_back(matrix_from_json(m));
    p.mean = matrix_from_json(j.at("mean"));
    p.var = matrix_from_json(j.at("var"));
    return p;
  }

 private:
  Params p_;
};

NaiveBayesModel::Params fit_naive_bayes(const TabularDataset& train) {
  NaiveBayesModel::Params p;
  const auto classes = static_cast<Eigen::Index>(train.class_count());
  const std::size_t d = train.dims();
  const auto hist = train.class_histogram();
  p.log_prior.resize(classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const auto nc = static_cast<double>(hist[static_cast<std::size_t>(c)]);
    p.log_prior(c) = nc > 0 ? std::log(nc / static_cast<double>(train.size())) : -std::numeric_limits<double>::infinity();
  }
  p.mean = Eigen::MatrixXd::Zero(classes, static_cast<Eigen::Index>(d));
  p.var = Eigen::MatrixXd::Ones(classes, static_cast<Eigen::Index>(d));
  p.log_prob.resize(d);

  double max_var = 0;
  for (std::size_t f = 0; f < d; ++f) {
    const auto& fs = train.schema.features[f];
    p.kinds.push_back(fs.kind);
    const auto fi = static_cast<Eigen::Index>(f);
    if (fs.kind == FeatureKind::categorical) {
      const auto card = static_cast<Eigen::Index>(std::max<std::size_t>(1, fs.values.size()));
      Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(classes, card);
      for (std::size_t i = 0; i < train.size(); ++i) {
        counts(train.class_of(i), static_cast<Eigen::Index>(train.rows[i][f])) += 1;
      }
      Eigen::MatrixXd lp(classes, card);
      for (Eigen::Index c = 0; c < classes; ++c) {
        const double nc = static_cast<double>(hist[static_cast<std::size_t>(c)]);
        for (Eigen::Index v = 0; v < card; ++v) lp(c, v) = std::log((counts(c, v) + 1.0) / (nc + static_cast<double>(card)));
      }
      p.log_prob[f] = lp;
      continue;
    }
    double all_s = 0, all_s2 = 0;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(classes), s2 = Eigen::VectorXd::Zero(classes);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double v = train.rows[i][f];
      s(train.class_of(i)) += v;
      s2(train.class_of(i)) += v * v;
      all_s += v;
      all_s2 += v * v;
    }
    const auto n = static_cast<double>(train.size());
    max_var = std::max(max_var, all_s2 / n - (all_s / n) * (all_s / n));
    for (Eigen::Index c = 0; c < classes; ++c) {
      const auto nc = static_cast<double>(hist[static_cast<std::size_t>(c)]);
      if (nc == 0) continue;
      p.mean(c, fi) = s(c) / nc;
      p.var(c, fi) = std::max(0.0, s2(c) / nc - p.mean(c, fi) * p.mean(c, fi));
    }
  }
  const double eps = std::max(1e-9 * max_var, 1e-12);
  for (std::size_t f = 0; f < d; ++f) {
    if (p.kinds[f] == FeatureKind::numerical) p.var.col(static_cast<Eigen::Index>(f)).array() += eps;
  }
  return p;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> fit_softmax(const RowMatrix& x, const TabularDataset& train,
                                                        const ModelSpec& spec, std::uint64_t seed) {
  const auto n = x.rows();
  const auto w = x.cols();
  const auto classes = static_cast<Eigen::Index>(train.class_count());
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(w, classes);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(classes);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  const auto batch = static_cast<Eigen::Index>(std::max<std::size_t>(1, spec.batch_size));
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index size = std::min(batch, n - start);
      std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + start + size);
      const RowMatrix xb = x(rows, Eigen::all);
      Eigen::MatrixXd g = (xb * weights).rowwise() + bias.transpose();
      for (Eigen::Index r = 0; r < size; ++r) {
        const double mx = g.row(r).maxCoeff();
        g.row(r) = (g.row(r).array() - mx).exp();
        g.row(r) /= g.row(r).sum();
        g(r, train.class_of(static_cast<std::size_t>(rows[static_cast<std::size_t>(r)]))) -= 1.0;
      }
      const double scale = spec.learning_rate / static_cast<double>(size);
      weights -= scale * (xb.transpose() * g) + spec.learning_rate * spec.l2 * weights;
      bias -= scale * g.colwise().sum().transpose();
    }
  }
  return {weights, bias};
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames) {
    if (name == s) return k;
  }
  throw Error("unknown model kind '" + std::string(s) + "'");
}

bool is_regressor(ModelKind kind) {
  return kind == ModelKind::linear_regression || kind == ModelKind::knn_regressor ||
         kind == ModelKind::tree_regressor;
}

std::vector<ModelKind> classifier_kinds() {
  return {ModelKind::knn, ModelKind::naive_bayes, ModelKind::decision_tree, ModelKind::logistic_regression};
}

std::vector<ModelKind> regressor_kinds() {
  return {ModelKind::linear_regression, ModelKind::knn_regressor, ModelKind::tree_regressor};
}

nlohmann::json spec_to_json(const ModelSpec& s) {
  return {{"kind", to_string(s.kind)}, {"knn_k", s.knn_k},       {"max_depth", s.max_depth},
          {"min_leaf", s.min_leaf},    {"learning_rate", s.learning_rate}, {"epochs", s.epochs},
          {"batch_size", s.batch_size}, {"l2", s.l2},             {"ridge", s.ridge}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.kind = model_kind_from_string(j.at("kind").get<std::string>());
  s.knn_k = j.value("knn_k", s.knn_k);
  s.max_depth = j.value("max_depth", s.max_depth);
  s.min_leaf = j.value("min_leaf", s.min_leaf);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.epochs = j.value("epochs", s.epochs);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.l2 = j.value("l2", s.l2);
  s.ridge = j.value("ridge", s.ridge);
  return s;
}

Preprocessor fit_preprocessor(const TabularDataset& train) {
  if (train.empty()) throw Error("preprocessor: empty training set");
  Preprocessor p;
  for (std::size_t f = 0; f < train.dims(); ++f) {
    const auto& fs = train.schema.features[f];
    p.kinds.push_back(fs.kind);
    p.offset.push_back(p.width);
    if (fs.kind == FeatureKind::categorical) {
      p.cardinality.push_back(fs.values.size());
      p.lo.push_back(0);
      p.hi.push_back(0);
      p.width += fs.values.size();
    } else {
      double lo = train.rows.front()[f], hi = lo;
      for (const auto& row : train.rows) {
        lo = std::min(lo, row[f]);
        hi = std::max(hi, row[f]);
      }
      p.cardinality.push_back(0);
      p.lo.push_back(lo);
      p.hi.push_back(hi);
      p.width += 1;
    }
  }
  return p;
}

Eigen::MatrixXd Preprocessor::transform(const TabularDataset& ds) const {
  if (ds.dims() != kinds.size()) throw Error("preprocessor: schema mismatch");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t f = 0; f < kinds.size(); ++f) {
      const double v = ds.rows[i][f];
      if (kinds[f] == FeatureKind::categorical) {
        if (v >= 0 && v < static_cast<double>(cardinality[f])) {
          x(r, static_cast<Eigen::Index>(offset[f] + static_cast<std::size_t>(v))) = 1.0;
        }
      } else {
        const double range = hi[f] - lo[f];
        x(r, static_cast<Eigen::Index>(offset[f])) = range > 0 ? (v - lo[f]) / range : 0.0;
      }
    }
  }
  return x;
}

std::vector<std::string> Model::predict_tokens(const TabularDataset& rows) const {
  const Eigen::VectorXd p = predict(rows);
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(format_label(schema_.label, p(i)));
  return out;
}

nlohmann::json Model::to_json() const {
  return {{"format", "ldss-model/1"},
          {"spec", spec_to_json(spec_)},
          {"schema", schema_to_json(schema_, true)},
          {"params", params_to_json()}};
}

std::unique_ptr<Model> fit_model(const ModelSpec& spec, const TabularDataset& train, std::uint64_t seed) {
  if (train.empty()) throw Error("fit_model: empty training set");
  const bool regress = is_regressor(spec.kind);
  if (regress == train.is_classification()) {
    throw Error(std::string("fit_model: ") + std::string(to_string(spec.kind)) + " does not match the label task");
  }
  if (spec.knn_k < 1) throw Error("fit_model: knn_k must be positive");
  if (spec.max_depth < 0) throw Error("fit_model: max_depth must be non-negative");
  if (spec.min_leaf < 1) throw Error("fit_model: min_leaf must be positive");

  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) y(static_cast<Eigen::Index>(i)) = train.labels[i];

  if (spec.kind == ModelKind::naive_bayes) {
    return std::make_unique<NaiveBayesModel>(spec, train.schema, fit_naive_bayes(train));
  }
  Preprocessor pre = fit_preprocessor(train);
  const Eigen::MatrixXd x = pre.transform(train);
  switch (spec.kind) {
    case ModelKind::knn:
    case ModelKind::knn_regressor:
      return std::make_unique<KnnModel>(spec, train.schema, std::move(pre), RowMatrix(x), y);
    case ModelKind::decision_tree:
    case ModelKind::tree_regressor: {
      CartBuilder builder(x, y, !regress, train.class_count(), spec);
      return std::make_unique<TreeModel>(spec, train.schema, std::move(pre), builder.build());
    }
    case ModelKind::logistic_regression: {
      const auto hist = train.class_histogram();
      if (std::count_if(hist.begin(), hist.end(), [](std::size_t c) { return c > 0; }) < 2) {
        throw Error("fit_model: logistic regression needs at least two classes");
      }
      auto [w, b] = fit_softmax(RowMatrix(x), train, spec, seed);
      return std::make_unique<LogisticModel>(spec, train.schema, std::move(pre), std::move(w), std::move(b));
    }
    case ModelKind::linear_regression: {
      Eigen::MatrixXd a(x.rows(), x.cols() + 1);
      a << x, Eigen::VectorXd::Ones(x.rows());
      Eigen::MatrixXd gram = a.transpose() * a;
      gram.diagonal().array() += spec.ridge * std::max<double>(1.0, static_cast<double>(x.rows()));
      Eigen::VectorXd beta = gram.ldlt().solve(a.transpose() * y);
      return std::make_unique<LinearModel>(spec, train.schema, std::move(pre), std::move(beta));
    }
    default:
      break;
  }
  throw Error("fit_model: unsupported model kind");
}

std::unique_ptr<Model> model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ldss-model/1") throw Error("model: unsupported format");
  const ModelSpec spec = spec_from_json(j.at("spec"));
  Schema schema = parse_schema(j.at("schema"));
  const auto& p = j.at("params");
  if (spec.kind == ModelKind::naive_bayes) {
    return std::make_unique<NaiveBayesModel>(spec, std::move(schema), NaiveBayesModel::params_from_json(p));
  }
  Preprocessor pre = preprocessor_from_json(p.at("preprocessor"));
  if (pre.kinds.size() != schema.dims()) throw Error("model: preprocessor does not match schema");
  switch (spec.kind) {
    case ModelKind::knn:
    case ModelKind::knn_regressor:
      return std::make_unique<KnnModel>(spec, std::move(schema), std::move(pre), RowMatrix(matrix_from_json(p.at("x"))),
                                        vector_from_json(p.at("y")));
    case ModelKind::decision_tree:
    case ModelKind::tree_regressor:
      return std::make_unique<TreeModel>(spec, std::move(schema), std::move(pre),
                                         TreeModel::nodes_from_json(p.at("nodes")));
    case ModelKind::logistic_regression:
      return std::make_unique<LogisticModel>(spec, std::move(schema), std::move(pre), matrix_from_json(p.at("w")),
                                             vector_from_json(p.at("b")));
    case ModelKind::linear_regression:
      return std::make_unique<LinearModel>(spec, std::move(schema), std::move(pre), vector_from_json(p.at("beta")));
    default:
      break;
  }
  throw Error("model: unsupported kind");
}

double match_rate(const Eigen::VectorXd& predictions, const std::vector<double>& expected) {
  if (static_cast<std::size_t>(predictions.size()) != expected.size()) throw Error("match_rate: length mismatch");
  if (expected.empty()) throw Error("match_rate: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) hits += predictions(static_cast<Eigen::Index>(i)) == expected[i];
  return static_cast<double>(hits) / static_cast<double>(expected.size());
}

double accuracy(const Model& model, const TabularDataset& ds) { return match_rate(model.predict(ds), ds.labels); }

}  // namespace ldss
