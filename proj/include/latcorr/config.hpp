#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latcorr/model.hpp"
#include "latcorr/problems.hpp"
#include "latcorr/training.hpp"

namespace latcorr {

struct InferenceConfig {
  std::vector<int> grid;          ///< points per coordinate; empty selects 201 (1D) or 101x101
  int samples = 1000;
  int reconstruct_samples = 5000;
  double reconstruct_step = 1e-3;
  std::uint64_t seed = 7;
  Index rows_per_batch = 4096;
};

/// Everything one experiment needs. Seeds: scenario.seed (data), prior_seed
/// (GP feature tables), train.seed (initialization and per-step draws),
/// inference.seed (predictive draws).
struct ExperimentConfig {
  std::string name;
  ScenarioConfig scenario;
  ArchConfig arch;
  std::uint64_t prior_seed = 11;
  TrainConfig train;
  InferenceConfig inference;
  std::string output;  ///< empty selects runs/<name>

  void validate() const;
  [[nodiscard]] std::vector<int> grid_counts() const;
  [[nodiscard]] std::filesystem::path output_dir() const;
};

/// Parses a config; every object rejects keys it does not know.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

ProblemSpec problem_for(const ExperimentConfig& c);
GpPrior prior_for(const ExperimentConfig& c);
LatentModel build_model(const ExperimentConfig& c);
LatentModel build_model(const ExperimentConfig& c, GpPrior prior);

/// Evaluation grid of the configured problem.
Matrix evaluation_grid(const ExperimentConfig& c);

}  // namespace latcorr
