#include "ldss/verify.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace ldss {

SubprocessOracle::SubprocessOracle(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw Error("oracle: empty command");
}

SubprocessOracle SubprocessOracle::shell(const std::string& command) {
  return SubprocessOracle({"/bin/sh", "-c", command});
}

std::vector<std::string> SubprocessOracle::predict_tokens(const TabularDataset& rows) {
  const ProcessResult r = run_process(argv_, protocol_input(rows));
  if (r.exit_code != 0) throw ProtocolError("oracle exited with status " + std::to_string(r.exit_code));
  return split_tokens(r.out);
}

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input) {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw Error(std::string("oracle: pipe failed: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw Error(std::string("oracle: pipe failed: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw Error(std::string("oracle: fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  const int to_child = in_pipe[1];
  const int from_child = out_pipe[0];
  fcntl(to_child, F_SETFL, fcntl(to_child, F_GETFL) | O_NONBLOCK);

  // A child that stops reading must not kill us with SIGPIPE.
  struct sigaction ignore {}, previous {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, &previous);

  ProcessResult result;
  std::size_t written = 0;
  bool writing = true;
  if (input.empty()) {
    close(to_child);
    writing = false;
  }
  char buf[65536];
  bool reading = true;
  while (reading) {
    pollfd fds[2];
    nfds_t count = 0;
    fds[count++] = {from_child, POLLIN, 0};
    if (writing) fds[count++] = {to_child, POLLOUT, 0};
    if (poll(fds, count, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (writing && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = write(to_child, input.data() + written, input.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      if (w < 0 && errno != EAGAIN && errno != EINTR) written = input.size();
      if (written >= input.size()) {
        close(to_child);
        writing = false;
      }
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t r = read(from_child, buf, sizeof buf);
      if (r > 0) {
        result.out.append(buf, static_cast<std::size_t>(r));
      } else if (r == 0 || (errno != EINTR && errno != EAGAIN)) {
        reading = false;
      }
    }
  }
  if (writing) close(to_child);
  close(from_child);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  sigaction(SIGPIPE, &previous, nullptr);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  if (result.exit_code == 127) throw Error("oracle: could not launch '" + argv.front() + "'");
  return result;
}

std::string protocol_input(const TabularDataset& rows) {
  std::string s;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s += features_to_csv_line(rows, i);
    s += '\n';
  }
  return s;
}

std::vector<std::string> split_tokens(std::string_view out) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < out.size()) {
    std::size_t end = out.find('\n', start);
    if (end == std::string_view::npos) end = out.size();
    std::string_view line = out.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.emplace_back(line);
    start = end + 1;
  }
  return tokens;
}

std::vector<std::string> query(PredictionOracle& oracle, const TabularDataset& rows) {
  auto tokens = oracle.predict_tokens(rows);
  if (tokens.size() != rows.size()) {
    throw ProtocolError("oracle returned " + std::to_string(tokens.size()) + " predictions for " +
                        std::to_string(rows.size()) + " rows");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty() || tokens[i].find(',') != std::string::npos) {
      throw ProtocolError("malformed prediction token on line " + std::to_string(i + 1));
    }
  }
  return tokens;
}

double parse_real_token(std::string_view token) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw ProtocolError("prediction '" + std::string(token) + "' is not a number");
  }
  return v;
}

Row parse_feature_line(std::string_view line, const Schema& schema) {
  const auto records = parse_csv_records(line);
  if (records.size() != 1) throw Error("protocol line must hold exactly one record");
  const auto& cells = records.front();
  if (cells.size() != schema.dims()) {
    throw Error("protocol line has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(schema.dims()));
  }
  Row row(schema.dims());
  for (std::size_t f = 0; f < schema.dims(); ++f) {
    const auto& fs = schema.features[f];
    if (fs.kind == FeatureKind::categorical) {
      const auto code = fs.find(cells[f]);
      row[f] = code ? static_cast<double>(*code) : -1.0;
    } else {
      double v = 0;
      const auto& s = cells[f];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error("protocol line: '" + s + "' is not a number for '" + fs.name + "'");
      }
      row[f] = v;
    }
  }
  return row;
}

void serve(const Model& model, std::istream& in, std::ostream& out) {
  TabularDataset batch;
  batch.schema = model.schema();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    batch.rows.push_back(parse_feature_line(line, batch.schema));
    batch.labels.push_back(0);
    batch.provenance.push_back(Provenance::trigger);
    batch.ids.push_back(batch.ids.size());
  }
  if (batch.empty()) return;
  for (const auto& token : model.predict_tokens(batch)) out << token << '\n';
  out.flush();
}

VerificationReport verdict_classification(const std::vector<std::string>& predictions,
                                          const std::vector<std::string>& intended, double tau) {
  if (intended.empty()) throw Error("verdict: empty trigger set");
  if (!(tau > 0 && tau < 1)) throw Error("verdict: tau must be in (0, 1)");
  if (predictions.size() != intended.size()) throw ProtocolError("verdict: prediction count mismatch");
  VerificationReport r;
  r.task = TaskKind::classification;
  r.trigger_count = intended.size();
  for (std::size_t i = 0; i < intended.size(); ++i) r.match_count += predictions[i] == intended[i];
  r.trigger_accuracy = static_cast<double>(r.match_count) / static_cast<double>(r.trigger_count);
  r.tau = tau;
  r.leaked = r.trigger_accuracy >= tau;
  r.predictions = predictions;
  r.intended = intended;
  return r;
}

double normalized_mae(const std::vector<double>& predictions, const std::vector<double>& intended, double target_min,
                      double target_max) {
  if (predictions.size() != intended.size() || intended.empty()) throw Error("normalized_mae: bad lengths");
  const double range = target_max - target_min;
  if (!(range > 0)) throw Error("normalized_mae: degenerate target range");
  double sum = 0;
  for (std::size_t i = 0; i < intended.size(); ++i) sum += std::abs(predictions[i] - intended[i]) / range;
  return sum / static_cast<double>(intended.size());
}

VerificationReport verdict_regression(const std::vector<double>& predictions, const std::vector<double>& intended,
                                      double reference_mae, double target_min, double target_max,
                                      double ratio_threshold) {
  if (intended.empty()) throw Error("verdict: empty trigger set");
  if (!(reference_mae > 0)) throw Error("verdict: reference MAE must be positive");
  if (predictions.size() != intended.size()) throw ProtocolError("verdict: prediction count mismatch");
  const double range = target_max - target_min;
  if (!(range > 0)) throw Error("verdict: degenerate target range");
  VerificationReport r;
  r.task = TaskKind::regression;
  r.trigger_count = intended.size();
  double abs_sum = 0, sq_sum = 0;
  for (std::size_t i = 0; i < intended.size(); ++i) {
    const double e = (predictions[i] - intended[i]) / range;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    r.predictions.push_back(format_number(predictions[i]));
    r.intended.push_back(format_number(intended[i]));
  }
  const auto n = static_cast<double>(intended.size());
  r.trigger_mae = abs_sum / n;
  r.trigger_mse = sq_sum / n;
  r.reference_mae = reference_mae;
  r.ratio_threshold = ratio_threshold;
  r.leaked = r.trigger_mae <= ratio_threshold * reference_mae;
  return r;
}

nlohmann::json report_to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["task"] = r.task == TaskKind::classification ? "classification" : "regression";
  j["trigger_count"] = r.trigger_count;
  j["verdict"] = r.leaked ? "leaked" : "not_leaked";
  if (r.task == TaskKind::classification) {
    j["match_count"] = r.match_count;
    j["trigger_accuracy"] = r.trigger_accuracy;
    j["tau"] = r.tau;
  } else {
    j["trigger_mae"] = r.trigger_mae;
    j["trigger_mse"] = r.trigger_mse;
    j["reference_mae"] = r.reference_mae;
    j["ratio_threshold"] = r.ratio_threshold;
  }
  j["predictions"] = r.predictions;
  j["intended"] = r.intended;
  return j;
}

}  // namespace ldss
