#include "latcorr/gp_prior.hpp"

#include <cmath>
#include <numbers>

#include "latcorr/errors.hpp"

namespace latcorr {

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, double lengthscale) {
  if (!(lengthscale > 0.0)) throw ConfigError("rbf_kernel: lengthscale must be positive");
  if (x.size() != xp.size()) throw ConfigError("rbf_kernel: dimension mismatch");
  return std::exp(-(x - xp).squaredNorm() / (2.0 * lengthscale * lengthscale));
}

GpPrior::GpPrior(int latent_dim, int feature_count, double lengthscale, int input_dim, std::uint64_t seed)
    : latent_dim_(latent_dim),
      feature_count_(feature_count),
      lengthscale_(lengthscale),
      input_dim_(input_dim),
      seed_(seed) {
  if (latent_dim <= 0 || feature_count <= 0 || input_dim <= 0) {
    throw ConfigError("GpPrior: latent_dim, feature_count and input_dim must be positive");
  }
  if (!(lengthscale > 0.0)) throw ConfigError("GpPrior: lengthscale must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / lengthscale);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  frequencies_.resize(static_cast<Index>(latent_dim) * feature_count, input_dim);
  phases_.resize(latent_dim, feature_count);
  for (Index r = 0; r < frequencies_.rows(); ++r) {
    for (Index c = 0; c < input_dim; ++c) frequencies_(r, c) = normal(rng);
  }
  for (Index k = 0; k < latent_dim; ++k) {
    for (Index j = 0; j < feature_count; ++j) phases_(k, j) = uniform(rng);
  }
}

GpPrior::GpPrior(int latent_dim, int feature_count, double lengthscale, int input_dim, std::uint64_t seed,
                 Matrix frequencies, Matrix phases)
    : latent_dim_(latent_dim),
      feature_count_(feature_count),
      lengthscale_(lengthscale),
      input_dim_(input_dim),
      seed_(seed),
      frequencies_(std::move(frequencies)),
      phases_(std::move(phases)) {
  if (frequencies_.rows() != static_cast<Index>(latent_dim) * feature_count ||
      frequencies_.cols() != input_dim || phases_.rows() != latent_dim || phases_.cols() != feature_count) {
    throw ConfigError("GpPrior: table shapes do not match dimensions");
  }
  if (!(lengthscale > 0.0)) throw ConfigError("GpPrior: lengthscale must be positive");
}

LatentDraw sample_draw(const GpPrior& prior, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentDraw d{Matrix(prior.latent_dim(), prior.feature_count())};
  for (Index k = 0; k < d.omega.rows(); ++k) {
    for (Index j = 0; j < d.omega.cols(); ++j) d.omega(k, j) = normal(rng);
  }
  return d;
}

Eigen::VectorXd sample_path(const GpPrior& prior, const LatentDraw& draw, const Eigen::VectorXd& x) {
  if (draw.omega.rows() != prior.latent_dim() || draw.omega.cols() != prior.feature_count()) {
    throw ConfigError("sample_path: draw dimensions do not match the prior");
  }
  if (x.size() != prior.input_dim()) throw ConfigError("sample_path: point dimension mismatch");
  const int m = prior.latent_dim();
  const int f = prior.feature_count();
  const double norm = std::sqrt(2.0 / f);
  Eigen::VectorXd z(m);
  for (int k = 0; k < m; ++k) {
    double acc = 0.0;
    for (int j = 0; j < f; ++j) {
      const double arg = prior.frequencies().row(k * f + j).dot(x) + prior.phases()(k, j);
      acc += draw.omega(k, j) * std::cos(arg);
    }
    z[k] = norm * acc;
  }
  return z;
}

PathFeatures::PathFeatures(const GpPrior& prior, const Matrix& points, const gradkit::DerivSpec& spec)
    : prior_(&prior), points_(points.rows()), spec_(spec) {
  if (points.cols() != prior.input_dim() || spec.dim() != prior.input_dim()) {
    throw ConfigError("PathFeatures: point dimension mismatch");
  }
  const int m = prior.latent_dim();
  const int f = prior.feature_count();
  const int dim = prior.input_dim();
  const double norm = std::sqrt(2.0 / f);
  value_.resize(m);
  d_.assign(m, std::vector<Matrix>(dim));
  d2_.assign(m, std::vector<Matrix>(dim));
  for (int k = 0; k < m; ++k) {
    const auto nu = prior.frequencies().middleRows(static_cast<Index>(k) * f, f);  // F x D
    Matrix arg = points * nu.transpose();                                          // P x F
    arg.rowwise() += prior.phases().row(k);
    const Matrix c = norm * arg.array().cos().matrix();
    const Matrix s = norm * arg.array().sin().matrix();
    for (int q = 0; q < dim; ++q) {
      const Eigen::RowVectorXd nq = nu.col(q).transpose();
      if (spec.first[q]) d_[k][q] = -(s.array().rowwise() * nq.array()).matrix();
      if (spec.second[q]) d2_[k][q] = -(c.array().rowwise() * nq.array().square()).matrix();
    }
    value_[k] = c;
  }
}

PathBatch PathFeatures::evaluate(const std::vector<LatentDraw>& draws) const {
  const int m = prior_->latent_dim();
  const int f = prior_->feature_count();
  const int dim = prior_->input_dim();
  const Index nd = static_cast<Index>(draws.size());
  Matrix omega_k(f, nd);
  PathBatch out;
  out.value.resize(nd * points_, m);
  out.d.assign(dim, Matrix());
  out.d2.assign(dim, Matrix());
  for (int q = 0; q < dim; ++q) {
    if (spec_.first[q]) out.d[q].resize(nd * points_, m);
    if (spec_.second[q]) out.d2[q].resize(nd * points_, m);
  }
  auto scatter = [&](Matrix& dst, const Matrix& pj, int k) {
    for (Index j = 0; j < nd; ++j) dst.block(j * points_, k, points_, 1) = pj.col(j);
  };
  for (int k = 0; k < m; ++k) {
    for (Index j = 0; j < nd; ++j) {
      if (draws[j].omega.rows() != m || draws[j].omega.cols() != f) {
        throw ConfigError("PathFeatures: draw dimensions do not match the prior");
      }
      omega_k.col(j) = draws[j].omega.row(k).transpose();
    }
    scatter(out.value, value_[k] * omega_k, k);
    for (int q = 0; q < dim; ++q) {
      if (spec_.first[q]) scatter(out.d[q], d_[k][q] * omega_k, k);
      if (spec_.second[q]) scatter(out.d2[q], d2_[k][q] * omega_k, k);
    }
  }
  return out;
}

gradkit::Jet as_jet(gradkit::Tape& tape, const PathBatch& batch) {
  gradkit::Jet j = gradkit::Jet::plain(tape.constant(batch.value), static_cast<int>(batch.d.size()));
  for (std::size_t q = 0; q < batch.d.size(); ++q) {
    if (batch.d[q].size() != 0) j.d[q] = tape.constant(batch.d[q]);
    if (batch.d2[q].size() != 0) j.d2[q] = tape.constant(batch.d2[q]);
  }
  return j;
}

}  // namespace latcorr
