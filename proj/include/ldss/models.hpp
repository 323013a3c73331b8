#pragma once

// Small built-in learners. Every model except naive Bayes works on a
// preprocessed matrix: categorical features one-hot encoded over the
// training vocabulary, numerical features min-max scaled by training range.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "ldss/dataset.hpp"

namespace ldss {

enum class ModelKind {
  knn,
  naive_bayes,
  decision_tree,
  logistic_regression,
  linear_regression,
  knn_regressor,
  tree_regressor
};

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view s);
bool is_regressor(ModelKind kind);
std::vector<ModelKind> classifier_kinds();
std::vector<ModelKind> regressor_kinds();

struct ModelSpec {
  ModelKind kind = ModelKind::knn;
  int knn_k = 5;
  int max_depth = 12;
  std::size_t min_leaf = 5;
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double l2 = 1e-4;
  /// Ridge term for linear regression.
  double ridge = 1e-8;
};

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

struct Preprocessor {
  std::vector<FeatureKind> kinds;
  /// One-hot width per categorical feature; codes at or beyond it (and
  /// negative codes) encode as all zeros.
  std::vector<std::size_t> cardinality;
  std::vector<double> lo, hi;
  std::vector<std::size_t> offset;
  std::size_t width = 0;

  Eigen::MatrixXd transform(const TabularDataset& ds) const;
};

Preprocessor fit_preprocessor(const TabularDataset& train);

class Model {
 public:
  virtual ~Model() = default;

  /// Class index (classifiers) or value (regressors) per row.
  virtual Eigen::VectorXd predict(const TabularDataset& rows) const = 0;
  virtual nlohmann::json params_to_json() const = 0;

  /// Predictions rendered as protocol tokens: class names or decimals.
  std::vector<std::string> predict_tokens(const TabularDataset& rows) const;
  nlohmann::json to_json() const;

  const ModelSpec& spec() const { return spec_; }
  const Schema& schema() const { return schema_; }

 protected:
  Model(ModelSpec spec, Schema schema) : spec_(std::move(spec)), schema_(std::move(schema)) {}

  ModelSpec spec_;
  Schema schema_;
};

std::unique_ptr<Model> fit_model(const ModelSpec& spec, const TabularDataset& train, std::uint64_t seed);
std::unique_ptr<Model> model_from_json(const nlohmann::json& j);

/// Fraction of rows whose predicted class equals the label.
double accuracy(const Model& model, const TabularDataset& ds);
/// Fraction of predictions equal to `expected` class indices.
double match_rate(const Eigen::VectorXd& predictions, const std::vector<double>& expected);

}  // namespace ldss
