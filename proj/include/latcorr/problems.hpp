#pragma once

#include <cstdint>
#include <vector>

#include "latcorr/model.hpp"
#include "latcorr/numerics.hpp"

namespace latcorr {

/// Observation locations (rows) and values of one data channel.
struct Observations {
  Matrix x;
  Eigen::VectorXd y;

  [[nodiscard]] Index size() const { return x.rows(); }
};

struct DataSet {
  ProblemId problem = ProblemId::Ode;
  Observations u, f, b;
  double noise_u = 0.0;
  double noise_f = 0.0;
  double noise_b = 0.0;
  std::uint64_t seed = 0;
};

struct ScenarioConfig {
  ProblemId problem = ProblemId::Ode;
  Scenario scenario = Scenario::S1;
  int n_u = 80;
  int n_f = 80;
  std::vector<int> u_lattice;  ///< reaction-diffusion lattice sizes (x, t)
  std::vector<int> f_lattice;
  int n_b = 21;                ///< reaction-diffusion points per initial/boundary segment
  double noise_u = 0.0;
  double noise_f = 0.0;
  double noise_b = 0.0;
  std::uint64_t seed = 1;
};

/// RK4 solution of u' = sin(3 pi t) + lambda u (1 - u) with spline dense output.
class OdeReference {
 public:
  explicit OdeReference(double lambda = 1.5, double u0 = 0.0, double step = 1e-4);

  [[nodiscard]] double u(double t) const { return spline_(t); }
  [[nodiscard]] Eigen::VectorXd u(const Eigen::VectorXd& t) const { return spline_(t); }
  [[nodiscard]] static double forcing(double t);
  [[nodiscard]] double lambda() const { return lambda_; }

 private:
  double lambda_;
  CubicSpline spline_;
};

/// Method-of-lines solution of u_t = D u_xx + lambda u (1 - u) on [0, 1]
/// with u(x, 0) = 0.5 sin^2(pi x) and homogeneous Dirichlet boundaries.
class RdReference {
 public:
  explicit RdReference(double diffusion = 0.01, double lambda = 2.0, int nodes = 401, double dt = 2.5e-5);

  /// Field at arbitrary (x, t) rows; integrates once through the sorted times.
  [[nodiscard]] Eigen::VectorXd u(const Matrix& points) const;
  [[nodiscard]] static double initial(double x);

 private:
  double diffusion_;
  double lambda_;
  int nodes_;
  double dt_;
};

/// Closed-form power-law channel flow and the matching Newtonian discrepancy.
struct ChannelReference {
  double n = 0.25;
  double c = -1.0;
  double mu0 = 0.5;
  double mu1 = 0.1;
  double height = 1.0;

  [[nodiscard]] double u(double y) const;
  [[nodiscard]] double d2u(double y) const;
  /// s(y) = c - mu1 u''(y); equals 4 mu1 c^4 |y|^3 / mu0^4 + c for n = 1/4.
  [[nodiscard]] double s(double y) const;
};

ProblemSpec build_scenario(const ScenarioConfig& config);

DataSet gen_ode_data(const ScenarioConfig& config);
DataSet gen_rd_data(const ScenarioConfig& config);
DataSet gen_channel_data(const ScenarioConfig& config);
/// Clean data for the configured problem followed by add_noise.
DataSet generate(const ScenarioConfig& config);

/// Independent Gaussian noise per channel; deterministic given seed.
DataSet add_noise(DataSet data, double sigma_u, double sigma_f, double sigma_b, std::uint64_t seed);

/// Reference u, f, phi, s on a grid; NaN where a quantity is undefined for the scenario.
struct ReferenceFields {
  Eigen::VectorXd u, f, phi, s;
};
ReferenceFields reference_fields(const ProblemSpec& problem, const Matrix& grid);

}  // namespace latcorr
