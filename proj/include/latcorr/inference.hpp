#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "latcorr/model.hpp"

namespace latcorr {

struct QuantitySummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

/// Per-point predictive mean and standard deviation of u, f, phi and s
/// (s only for scenarios with a correction term).
struct PredictiveSummary {
  Matrix grid;
  std::map<std::string, QuantitySummary> quantities;
  int samples = 0;
  std::optional<double> scalar_mean;  ///< learnable lambda / mu1 across draws
  std::optional<double> scalar_std;
};

/// Per-draw values kept for reconstruction: rows = grid points, cols = draws.
struct PredictiveSamples {
  Matrix f;
  Matrix phi;
};

struct PredictOptions {
  int samples = 1000;
  std::uint64_t seed = 7;
  /// Upper bound on draws x points evaluated on one tape.
  Index rows_per_batch = 4096;
  Index draws_per_batch = 16;
  /// When set, f and phi draws are stored here.
  PredictiveSamples* keep = nullptr;
};

/// Monte Carlo propagation of latent draws: u = mu_u + sigma_u eps (mu_u only
/// for noise-free models), s and phi from the same draw, f = mu_f.
PredictiveSummary predict(const LatentModel& model, const ParamVector& params, const Matrix& grid,
                          const PredictOptions& options);

/// ||pred - ref|| / ||ref||; ConfigError for a zero reference or length mismatch.
double relative_l2(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);
/// Fraction of points with |mean - ref| <= 2 std.
double coverage_2sigma(const Eigen::VectorXd& mean, const Eigen::VectorXd& std, const Eigen::VectorXd& ref);

struct ReconstructionResult {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  int samples = 0;
};

/// For each of the first n_samples columns, integrates u' = f(t) + phi(t)
/// (natural cubic splines through the sampled values) from u0 with RK4,
/// landing on every grid point.
ReconstructionResult reconstruct_u_tilde(const Matrix& f_samples, const Matrix& phi_samples,
                                         const Eigen::VectorXd& grid, double u0, int n_samples,
                                         double step = 1e-3);

}  // namespace latcorr
