#include "latcorr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "latcorr/errors.hpp"
#include "latcorr/numerics.hpp"

namespace latcorr {

namespace {

std::mt19937_64 draw_rng(std::uint64_t seed, Index draw) {
  const auto j = static_cast<std::uint64_t>(draw);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(j >> 32), 0x9e37u};
  return std::mt19937_64(seq);
}

// Shifted running moments; the shift is the first sample at each point.
struct Moments {
  Eigen::VectorXd shift, sum, sum2;
  Index n = 0;

  explicit Moments(Index points) : shift(points), sum(Eigen::VectorXd::Zero(points)), sum2(sum) {}

  void add(Index offset, const Eigen::VectorXd& x, bool first) {
    const Index m = x.size();
    if (first) shift.segment(offset, m) = x;
    const Eigen::ArrayXd d = x.array() - shift.segment(offset, m).array();
    sum.segment(offset, m).array() += d;
    sum2.segment(offset, m).array() += d.square();
  }

  [[nodiscard]] QuantitySummary finish(Index samples) const {
    const double n = static_cast<double>(samples);
    QuantitySummary q;
    const Eigen::ArrayXd mean_d = sum.array() / n;
    q.mean = (shift.array() + mean_d).matrix();
    if (samples < 2) {
      q.std = Eigen::VectorXd::Zero(sum.size());
    } else {
      q.std = ((sum2.array() - n * mean_d.square()) / (n - 1.0)).max(0.0).sqrt().matrix();
    }
    return q;
  }
};

}  // namespace

PredictiveSummary predict(const LatentModel& model, const ParamVector& params, const Matrix& grid,
                          const PredictOptions& options) {
  if (options.samples < 1) throw ConfigError("predict: at least one sample is required");
  if (options.rows_per_batch < 1 || options.draws_per_batch < 1) {
    throw ConfigError("predict: batch sizes must be positive");
  }
  if (grid.cols() != model.problem().domain.dim()) throw ConfigError("predict: grid dimension mismatch");
  const Index points = grid.rows();
  const Index samples = options.samples;
  // The encoder and kernel weights are shared by the draws of one batch.
  const Index jc = std::min<Index>(samples, std::min<Index>(options.draws_per_batch, options.rows_per_batch));
  const Index pc = std::min<Index>(std::max<Index>(points, 1), std::max<Index>(1, options.rows_per_batch / jc));
  const bool noisy_u = !model.noise_free();

  Moments mu(points), mf(points), mphi(points), ms(points);
  bool has_s = false;
  double scalar_sum = 0.0, scalar_sum2 = 0.0;
  if (options.keep != nullptr) {
    options.keep->f.resize(points, samples);
    options.keep->phi.resize(points, samples);
  }
  const auto frozen = [](const std::string&) { return true; };

  for (Index p0 = 0; p0 < points; p0 += pc) {
    const Index np = std::min(pc, points - p0);
    const Matrix coords = grid.middleRows(p0, np);
    const PathFeatures features(model.prior(), coords, model.spec_for(true));
    for (Index j0 = 0; j0 < samples; j0 += jc) {
      const Index nj = std::min(jc, samples - j0);
      std::vector<LatentDraw> draws;
      Matrix eps(nj, 1);
      Matrix noise(nj, np);
      for (Index j = 0; j < nj; ++j) {
        auto rng = draw_rng(options.seed, j0 + j);
        std::normal_distribution<double> normal(0.0, 1.0);
        draws.push_back(sample_draw(model.prior(), rng));
        eps(j, 0) = normal(rng);
        if (noisy_u) {
          for (Index p = 0; p < p0; ++p) (void)normal(rng);
          for (Index p = 0; p < np; ++p) noise(j, p) = normal(rng);
        }
      }
      Tape tape;
      const BoundParams bp(tape, params, frozen);
      const DrawContext ctx = model.begin(tape, bp, draws, eps);
      const Evaluation ev = model.evaluate(ctx, coords, features, true);
      Eigen::VectorXd sigma_u;
      if (noisy_u) sigma_u = model.variance()->sigma("u", tape, coords, bp).value();
      if (ctx.scalar.valid() && p0 == 0) {
        const Matrix& s = ctx.scalar.value();
        scalar_sum += s.sum();
        scalar_sum2 += s.squaredNorm();
      }
      has_s = ev.s.valid();
      for (Index j = 0; j < nj; ++j) {
        const bool first = j0 + j == 0;
        Eigen::VectorXd u = ev.u.value.value().middleRows(j * np, np);
        if (noisy_u) u.array() += sigma_u.array() * noise.row(j).transpose().array();
        const Eigen::VectorXd f = ev.f.value().middleRows(j * np, np);
        const Eigen::VectorXd phi = ev.phi.value().middleRows(j * np, np);
        mu.add(p0, u, first);
        mf.add(p0, f, first);
        mphi.add(p0, phi, first);
        if (has_s) ms.add(p0, ev.s.value().middleRows(j * np, np), first);
        if (options.keep != nullptr) {
          options.keep->f.block(p0, j0 + j, np, 1) = f;
          options.keep->phi.block(p0, j0 + j, np, 1) = phi;
        }
      }
    }
  }

  PredictiveSummary out;
  out.grid = grid;
  out.samples = static_cast<int>(samples);
  out.quantities["u"] = mu.finish(samples);
  out.quantities["f"] = mf.finish(samples);
  out.quantities["phi"] = mphi.finish(samples);
  if (has_s) out.quantities["s"] = ms.finish(samples);
  if (model.scalar()) {
    const double n = static_cast<double>(samples);
    const double m = scalar_sum / n;
    out.scalar_mean = m;
    out.scalar_std = samples > 1 ? std::sqrt(std::max(0.0, (scalar_sum2 - n * m * m) / (n - 1.0))) : 0.0;
  }
  return out;
}

double relative_l2(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  if (pred.size() != ref.size()) throw ConfigError("relative_l2: length mismatch");
  const double norm = ref.norm();
  if (!(norm > 0.0)) throw ConfigError("relative_l2: reference has zero norm");
  return (pred - ref).norm() / norm;
}

double coverage_2sigma(const Eigen::VectorXd& mean, const Eigen::VectorXd& std, const Eigen::VectorXd& ref) {
  if (mean.size() != ref.size() || std.size() != ref.size()) throw ConfigError("coverage_2sigma: length mismatch");
  if (ref.size() == 0) throw ConfigError("coverage_2sigma: empty input");
  const auto inside = ((mean - ref).array().abs() <= 2.0 * std.array()).cast<double>();
  return inside.sum() / static_cast<double>(ref.size());
}

ReconstructionResult reconstruct_u_tilde(const Matrix& f_samples, const Matrix& phi_samples,
                                         const Eigen::VectorXd& grid, double u0, int n_samples, double step) {
  if (f_samples.rows() != grid.size() || phi_samples.rows() != grid.size()) {
    throw ConfigError("reconstruct: samples must have one row per grid point");
  }
  if (n_samples < 1 || n_samples > f_samples.cols() || n_samples > phi_samples.cols()) {
    throw ConfigError("reconstruct: n_samples exceeds the available samples");
  }
  if (!(step > 0.0)) throw ConfigError("reconstruct: step must be positive");
  const Index n = grid.size();
  Matrix paths(n, n_samples);
  for (int j = 0; j < n_samples; ++j) {
    // the spline constructor rejects a grid that is not strictly increasing
    const CubicSpline f(grid, f_samples.col(j));
    const CubicSpline phi(grid, phi_samples.col(j));
    const auto rhs = [&](double t, double) { return f(t) + phi(t); };
    paths(0, j) = u0;
    double u = u0;
    for (Index i = 1; i < n; ++i) {
      const double span = grid[i] - grid[i - 1];
      const auto steps = static_cast<Index>(std::ceil(span / step - 1e-9));
      u = rk4(rhs, u, grid[i - 1], grid[i], steps).back();
      paths(i, j) = u;
    }
  }
  ReconstructionResult r;
  r.grid = grid;
  r.samples = n_samples;
  r.mean = paths.rowwise().mean();
  if (n_samples > 1) {
    r.std = ((paths.colwise() - r.mean).array().square().rowwise().sum() / (n_samples - 1.0)).sqrt().matrix();
  } else {
    r.std = Eigen::VectorXd::Zero(n);
  }
  return r;
}

}  // namespace latcorr
