#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "latcorr/config.hpp"

namespace latcorr::cli {

namespace fs = std::filesystem;

/// Requested operation does not apply to the configured problem.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigInvalid = 2,
  kDiverged = 3,
  kBadFile = 4,
  kUnsupported = 5,
};

/// File names inside an experiment directory.
struct RunPaths {
  fs::path root;

  [[nodiscard]] fs::path dataset() const { return root / "dataset.csv"; }
  [[nodiscard]] fs::path dataset_meta() const { return root / "dataset.json"; }
  [[nodiscard]] fs::path checkpoint() const { return root / "checkpoint.bin"; }
  [[nodiscard]] fs::path trace() const { return root / "loss_trace.csv"; }
  [[nodiscard]] fs::path summary(const std::string& q) const { return root / "summary" / (q + ".csv"); }
  [[nodiscard]] fs::path predict_meta() const { return root / "summary" / "predict.json"; }
  [[nodiscard]] fs::path samples(const std::string& q) const { return root / "summary" / ("samples_" + q + ".csv"); }
  [[nodiscard]] fs::path reconstruction() const { return root / "reconstruction.csv"; }
  [[nodiscard]] fs::path metrics() const { return root / "metrics.json"; }
};

void cmd_generate(const ExperimentConfig& c, const RunPaths& out);
/// Trains from the dataset in `data`; with `resume` continues from the checkpoint in `out`.
void cmd_train(const ExperimentConfig& c, const RunPaths& data, const RunPaths& out, bool resume, std::ostream& log);
/// Summaries from the checkpoint; ODE runs also keep f and phi draws for reconstruction.
void cmd_predict(const ExperimentConfig& c, const RunPaths& out);
void cmd_reconstruct(const ExperimentConfig& c, const RunPaths& out, std::optional<int> n_samples,
                     std::optional<double> u0);
nlohmann::json cmd_evaluate(const ExperimentConfig& c, const RunPaths& out);

}  // namespace latcorr::cli
