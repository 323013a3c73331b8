#pragma once

// Black-box verification. The wire form of the subprocess oracle:
//   verifier -> oracle stdin : one CSV line of feature cells per trigger row,
//                              then end of stream
//   oracle -> verifier stdout: one prediction token per line, same order
// Class predictions are verbatim class names; regression predictions are
// decimal numbers.

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ldss/dataset.hpp"
#include "ldss/models.hpp"

namespace ldss {

/// Oracle output that breaks the line protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class PredictionOracle {
 public:
  virtual ~PredictionOracle() = default;
  /// One raw token per row, in order.
  virtual std::vector<std::string> predict_tokens(const TabularDataset& rows) = 0;
};

class ModelOracle final : public PredictionOracle {
 public:
  explicit ModelOracle(const Model& model) : model_(model) {}
  std::vector<std::string> predict_tokens(const TabularDataset& rows) override { return model_.predict_tokens(rows); }

 private:
  const Model& model_;
};

/// Any callable mapping rows to tokens; used for synthetic oracles.
class FunctionOracle final : public PredictionOracle {
 public:
  using Fn = std::function<std::vector<std::string>(const TabularDataset&)>;
  explicit FunctionOracle(Fn fn) : fn_(std::move(fn)) {}
  std::vector<std::string> predict_tokens(const TabularDataset& rows) override { return fn_(rows); }

 private:
  Fn fn_;
};

/// Launches `argv` once per batch and speaks the line protocol over pipes.
class SubprocessOracle final : public PredictionOracle {
 public:
  explicit SubprocessOracle(std::vector<std::string> argv);
  /// Runs `command` through /bin/sh -c.
  static SubprocessOracle shell(const std::string& command);
  std::vector<std::string> predict_tokens(const TabularDataset& rows) override;

 private:
  std::vector<std::string> argv_;
};

/// Result of running a child process to completion.
struct ProcessResult {
  std::string out;
  int exit_code = 0;
};
ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input);

/// Feature cells of every row as protocol lines.
std::string protocol_input(const TabularDataset& rows);
/// Splits oracle output into tokens; a final newline is optional.
std::vector<std::string> split_tokens(std::string_view out);

/// Queries and checks the reply: one non-empty, comma-free token per row.
std::vector<std::string> query(PredictionOracle& oracle, const TabularDataset& rows);

/// Parses a regression token; throws ProtocolError when it is not a number.
double parse_real_token(std::string_view token);

/// Parses one protocol line into feature cells. Unknown categories become
/// code -1.
Row parse_feature_line(std::string_view line, const Schema& schema);

/// Reads protocol lines from `in` until end of stream and writes one
/// prediction per line to `out`.
void serve(const Model& model, std::istream& in, std::ostream& out);

struct VerificationReport {
  TaskKind task = TaskKind::classification;
  std::size_t trigger_count = 0;
  std::size_t match_count = 0;
  double trigger_accuracy = 0;
  double tau = 0.6;
  bool leaked = false;
  std::vector<std::string> predictions;
  std::vector<std::string> intended;
  double trigger_mae = 0;
  double trigger_mse = 0;
  double reference_mae = 0;
  double ratio_threshold = 0.5;
};

/// leaked iff matches / triggers >= tau.
VerificationReport verdict_classification(const std::vector<std::string>& predictions,
                                          const std::vector<std::string>& intended, double tau = 0.6);

/// Errors are measured on targets mapped to [0, 1] by [target_min,
/// target_max]; leaked iff MAE <= ratio_threshold * reference_mae.
VerificationReport verdict_regression(const std::vector<double>& predictions, const std::vector<double>& intended,
                                      double reference_mae, double target_min, double target_max,
                                      double ratio_threshold = 0.5);

/// Normalized mean absolute error between two target lists.
double normalized_mae(const std::vector<double>& predictions, const std::vector<double>& intended, double target_min,
                      double target_max);

nlohmann::json report_to_json(const VerificationReport& r);

}  // namespace ldss
