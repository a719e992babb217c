#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latcorr/config.hpp"
#include "latcorr/inference.hpp"

namespace latcorr {

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

// ----------------------------------------------------------- checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ExperimentConfig config;
  GpPrior prior;
  TrainState state;
};

/// Little-endian container: magic, version, config JSON, prior tables,
/// iteration, named parameter slices, Adam moments, loss trace, checksum.
std::string encode_checkpoint(const Checkpoint& c);
/// FormatError on a bad magic, checksum or version.
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------- tables

/// Columns channel,coord_1[,coord_2],value.
std::string dataset_csv(const DataSet& d, int dim);
DataSet parse_dataset_csv(const std::string& text, ProblemId problem);
/// Counts, noise levels, seed and problem constants.
nlohmann::json dataset_metadata(const DataSet& d, const ScenarioConfig& sc, const ProblemSpec& p);
/// Reads the CSV and fills noise levels and seed from the metadata.
DataSet read_dataset(const std::filesystem::path& csv, const std::filesystem::path& metadata);

std::string trace_csv(const std::vector<TraceRow>& trace);

/// Coordinates with mean and std, and a reference column when given.
std::string summary_csv(const Matrix& grid, const QuantitySummary& q, const Eigen::VectorXd* reference);

struct SummaryTable {
  Matrix grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::optional<Eigen::VectorXd> reference;
};
SummaryTable parse_summary_csv(const std::string& text);

/// One row per grid point: coordinates then one column per draw.
std::string samples_csv(const Matrix& grid, const Matrix& samples);
/// Returns the draws; `grid` receives the coordinates.
Matrix parse_samples_csv(const std::string& text, Matrix& grid);

}  // namespace latcorr
