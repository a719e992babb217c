#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "latcorr/gradkit/jet.hpp"

namespace latcorr {

using gradkit::Index;
using gradkit::Matrix;

/// Squared-exponential kernel exp(-|x - x'|^2 / (2 l^2)).
double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, double lengthscale);

/// Gaussian-process prior over the M latent components, represented by
/// random Fourier features so that sample paths are smooth closed-form
/// functions evaluable (with derivatives) anywhere in the domain.
///
/// Component k of a path is sqrt(2/F) * sum_j omega[k,j] cos(<nu[k,j], x> + phase[k,j])
/// with nu ~ N(0, l^-2 I) and phase ~ U[0, 2pi); for omega ~ N(0, I) the
/// components are independent with covariance approximating rbf_kernel.
class GpPrior {
 public:
  GpPrior() = default;
  GpPrior(int latent_dim, int feature_count, double lengthscale, int input_dim, std::uint64_t seed);
  /// Rebuilds a prior from stored tables (checkpoint loading).
  GpPrior(int latent_dim, int feature_count, double lengthscale, int input_dim, std::uint64_t seed,
          Matrix frequencies, Matrix phases);

  [[nodiscard]] int latent_dim() const { return latent_dim_; }
  [[nodiscard]] int feature_count() const { return feature_count_; }
  [[nodiscard]] double lengthscale() const { return lengthscale_; }
  [[nodiscard]] int input_dim() const { return input_dim_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  /// (M*F) x D; row k*F + j holds nu[k,j].
  [[nodiscard]] const Matrix& frequencies() const { return frequencies_; }
  /// M x F.
  [[nodiscard]] const Matrix& phases() const { return phases_; }

 private:
  int latent_dim_ = 0;
  int feature_count_ = 0;
  double lengthscale_ = 1.0;
  int input_dim_ = 1;
  std::uint64_t seed_ = 0;
  Matrix frequencies_;
  Matrix phases_;
};

/// Standard-normal weights selecting one sample path (M x F).
struct LatentDraw {
  Matrix omega;
};

LatentDraw sample_draw(const GpPrior& prior, std::mt19937_64& rng);

/// Latent path value at one point (length M).
Eigen::VectorXd sample_path(const GpPrior& prior, const LatentDraw& draw, const Eigen::VectorXd& x);

/// Path values and input derivatives for a batch of draws, rows draw-major
/// (row j*P + p is draw j at point p).
struct PathBatch {
  Matrix value;
  std::vector<Matrix> d;   ///< empty matrix where the channel is not tracked
  std::vector<Matrix> d2;
};

/// Fourier features of a fixed point set, reusable across draws.
class PathFeatures {
 public:
  PathFeatures(const GpPrior& prior, const Matrix& points, const gradkit::DerivSpec& spec);

  [[nodiscard]] Index point_count() const { return points_; }
  [[nodiscard]] PathBatch evaluate(const std::vector<LatentDraw>& draws) const;

 private:
  const GpPrior* prior_;
  Index points_;
  gradkit::DerivSpec spec_;
  // Per latent component: P x F feature matrices per channel.
  std::vector<Matrix> value_;
  std::vector<std::vector<Matrix>> d_;
  std::vector<std::vector<Matrix>> d2_;
};

/// Wraps a PathBatch as constant jet channels on a tape.
gradkit::Jet as_jet(gradkit::Tape& tape, const PathBatch& batch);

}  // namespace latcorr
