#include "latcorr/problems.hpp"

#include <cmath>
#include <map>
#include <limits>
#include <numbers>
#include <random>

#include "latcorr/errors.hpp"

namespace latcorr {

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

Matrix uniform_points(const Domain& dom, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix x(n, dom.dim());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dom.dim(); ++k) x(i, k) = dom.lo[k] + (dom.hi[k] - dom.lo[k]) * unit(rng);
  }
  return x;
}

void require_counts(const ScenarioConfig& c) {
  if (c.n_u < 0 || c.n_f < 0) throw ConfigError("observation counts must be nonnegative");
  if (c.noise_u < 0.0 || c.noise_f < 0.0 || c.noise_b < 0.0) throw ConfigError("noise levels must be nonnegative");
}

}  // namespace

// -------------------------------------------------------------------- ODE

OdeReference::OdeReference(double lambda, double u0, double step) : lambda_(lambda) {
  if (!(step > 0.0) || step > 0.5) throw ConfigError("OdeReference: step must be in (0, 0.5]");
  const Index steps = static_cast<Index>(std::llround(1.0 / step));
  const auto u = rk4([lambda](double t, double y) { return forcing(t) + lambda * y * (1.0 - y); }, u0, 0.0, 1.0,
                     steps);
  spline_ = CubicSpline(linspace(0.0, 1.0, steps + 1), Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
}

double OdeReference::forcing(double t) { return std::sin(3.0 * kPi * t); }

// --------------------------------------------------------------------- RD

RdReference::RdReference(double diffusion, double lambda, int nodes, double dt)
    : diffusion_(diffusion), lambda_(lambda), nodes_(nodes), dt_(dt) {
  if (nodes < 3 || !(dt > 0.0)) throw ConfigError("RdReference: need >= 3 nodes and a positive step");
}

double RdReference::initial(double x) {
  const double s = std::sin(kPi * x);
  return 0.5 * s * s;
}

Eigen::VectorXd RdReference::u(const Matrix& points) const {
  if (points.cols() != 2) throw ConfigError("RdReference: points must be (x, t)");
  std::map<double, std::vector<Index>> by_time;
  for (Index i = 0; i < points.rows(); ++i) {
    if (points(i, 1) < 0.0) throw DomainError("RdReference: negative time");
    by_time[points(i, 1)].push_back(i);
  }
  const Eigen::VectorXd xs = linspace(0.0, 1.0, nodes_);
  const double dx = 1.0 / (nodes_ - 1);
  const double coef = diffusion_ / (dx * dx);
  Eigen::ArrayXd u(nodes_);
  for (int i = 0; i < nodes_; ++i) u[i] = initial(xs[i]);
  u[0] = u[nodes_ - 1] = 0.0;
  const Index n = nodes_;
  auto rhs = [&](const Eigen::ArrayXd& v) {
    Eigen::ArrayXd r = Eigen::ArrayXd::Zero(n);
    r.segment(1, n - 2) = coef * (v.segment(0, n - 2) - 2.0 * v.segment(1, n - 2) + v.segment(2, n - 2)) +
                          lambda_ * v.segment(1, n - 2) * (1.0 - v.segment(1, n - 2));
    return r;
  };
  Eigen::VectorXd out(points.rows());
  double t = 0.0;
  for (const auto& [target, rows] : by_time) {
    if (target > t) {
      const Index steps = static_cast<Index>(std::ceil((target - t) / dt_ - 1e-9));
      const double h = (target - t) / static_cast<double>(steps);
      for (Index k = 0; k < steps; ++k) {
        const Eigen::ArrayXd k1 = rhs(u);
        const Eigen::ArrayXd k2 = rhs(u + 0.5 * h * k1);
        const Eigen::ArrayXd k3 = rhs(u + 0.5 * h * k2);
        const Eigen::ArrayXd k4 = rhs(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      if (!u.allFinite()) throw NumericError("reaction-diffusion reference became non-finite");
      t = target;
    }
    const CubicSpline sp(xs, u.matrix());
    for (Index r : rows) out[r] = sp(points(r, 0));
  }
  return out;
}

// ---------------------------------------------------------------- channel

double ChannelReference::u(double y) const {
  const double k = n / (n + 1.0) * std::pow(-c / mu0, 1.0 / n);
  const double e = 1.0 + 1.0 / n;
  return k * (std::pow(0.5 * height, e) - std::pow(std::abs(y), e));
}

double ChannelReference::d2u(double y) const {
  const double k = n / (n + 1.0) * std::pow(-c / mu0, 1.0 / n);
  const double e = 1.0 + 1.0 / n;
  return -k * e * (e - 1.0) * std::pow(std::abs(y), e - 2.0);
}

double ChannelReference::s(double y) const { return c - mu1 * d2u(y); }

// -------------------------------------------------------------- scenarios

ProblemSpec build_scenario(const ScenarioConfig& config) {
  require_counts(config);
  return make_problem(config.problem, config.scenario);
}

DataSet gen_ode_data(const ScenarioConfig& config) {
  require_counts(config);
  const ProblemSpec problem = build_scenario(config);
  const OdeReference ref(problem.lambda_true, problem.u0);
  auto loc_rng = stream(config.seed, 1);
  DataSet d;
  d.problem = ProblemId::Ode;
  d.seed = config.seed;
  d.u.x = uniform_points(problem.domain, config.n_u, loc_rng);
  d.f.x = uniform_points(problem.domain, config.n_f, loc_rng);
  d.u.y = ref.u(Eigen::VectorXd(d.u.x.col(0)));
  d.f.y = d.f.x.col(0).unaryExpr([](double t) { return OdeReference::forcing(t); });
  d.b.x = Matrix::Constant(1, 1, problem.domain.lo[0]);
  d.b.y = Eigen::VectorXd::Constant(1, problem.u0);
  return d;
}

DataSet gen_rd_data(const ScenarioConfig& config) {
  require_counts(config);
  const ProblemSpec problem = build_scenario(config);
  const std::vector<int> ul = config.u_lattice.empty() ? std::vector<int>{11, 11} : config.u_lattice;
  const std::vector<int> fl = config.f_lattice.empty() ? std::vector<int>{13, 15} : config.f_lattice;
  if (config.n_b < 2) throw ConfigError("reaction-diffusion needs at least two points per boundary segment");
  DataSet d;
  d.problem = ProblemId::ReactionDiffusion;
  d.seed = config.seed;
  d.u.x = uniform_grid(problem.domain, ul);
  d.f.x = uniform_grid(problem.domain, fl);
  const RdReference ref(problem.diffusion, problem.lambda_true);
  d.u.y = ref.u(d.u.x);
  d.f.y = Eigen::VectorXd::Zero(d.f.x.rows());
  // initial line t = 0, then the walls x = 0 and x = 1 for t > 0
  const int nb = config.n_b;
  const Eigen::VectorXd s = linspace(0.0, 1.0, nb);
  d.b.x.resize(nb + 2 * (nb - 1), 2);
  d.b.y.resize(d.b.x.rows());
  Index r = 0;
  for (int i = 0; i < nb; ++i, ++r) {
    d.b.x.row(r) << s[i], 0.0;
    d.b.y[r] = RdReference::initial(s[i]);
  }
  d.b.y[0] = d.b.y[nb - 1] = 0.0;
  for (double wall : {0.0, 1.0}) {
    for (int i = 1; i < nb; ++i, ++r) {
      d.b.x.row(r) << wall, s[i];
      d.b.y[r] = 0.0;
    }
  }
  return d;
}

DataSet gen_channel_data(const ScenarioConfig& config) {
  require_counts(config);
  const ProblemSpec problem = build_scenario(config);
  const ChannelReference ref{problem.power_n, problem.pressure_c, problem.mu0, problem.mu1, problem.height};
  auto loc_rng = stream(config.seed, 1);
  DataSet d;
  d.problem = ProblemId::Channel;
  d.seed = config.seed;
  d.u.x = uniform_points(problem.domain, config.n_u, loc_rng);
  d.f.x = uniform_points(problem.domain, config.n_f, loc_rng);
  d.u.y = d.u.x.col(0).unaryExpr([&](double y) { return ref.u(y); });
  d.f.y = Eigen::VectorXd::Zero(config.n_f);
  d.b.x.resize(2, 1);
  d.b.x << -0.5 * problem.height, 0.5 * problem.height;
  d.b.y = Eigen::VectorXd::Zero(2);
  return d;
}

DataSet generate(const ScenarioConfig& config) {
  DataSet d;
  switch (config.problem) {
    case ProblemId::Ode: d = gen_ode_data(config); break;
    case ProblemId::ReactionDiffusion: d = gen_rd_data(config); break;
    case ProblemId::Channel: d = gen_channel_data(config); break;
  }
  return add_noise(std::move(d), config.noise_u, config.noise_f, config.noise_b, config.seed);
}

DataSet add_noise(DataSet data, double sigma_u, double sigma_f, double sigma_b, std::uint64_t seed) {
  if (sigma_u < 0.0 || sigma_f < 0.0 || sigma_b < 0.0) throw ConfigError("noise levels must be nonnegative");
  auto rng = stream(seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto perturb = [&](Observations& o, double sigma) {
    for (Index i = 0; i < o.y.size(); ++i) {
      const double e = normal(rng);
      if (sigma > 0.0) o.y[i] += sigma * e;
    }
  };
  perturb(data.u, sigma_u);
  perturb(data.f, sigma_f);
  perturb(data.b, sigma_b);
  data.noise_u = sigma_u;
  data.noise_f = sigma_f;
  data.noise_b = sigma_b;
  return data;
}

ReferenceFields reference_fields(const ProblemSpec& problem, const Matrix& grid) {
  const Index n = grid.rows();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ReferenceFields r;
  r.s = Eigen::VectorXd::Constant(n, nan);
  switch (problem.id) {
    case ProblemId::Ode: {
      const OdeReference ref(problem.lambda_true, problem.u0);
      r.u = ref.u(Eigen::VectorXd(grid.col(0)));
      r.f = grid.col(0).unaryExpr([](double t) { return OdeReference::forcing(t); });
      r.phi = problem.lambda_true * r.u.array() * (1.0 - r.u.array());
      if (problem.scenario == Scenario::S3) r.s = r.phi.array() - problem.s3_base_coeff * r.u.array().cos();
      break;
    }
    case ProblemId::ReactionDiffusion: {
      const RdReference ref(problem.diffusion, problem.lambda_true);
      r.u = ref.u(grid);
      r.f = Eigen::VectorXd::Zero(n);
      r.phi = problem.lambda_true * r.u.array() * (1.0 - r.u.array());
      if (problem.scenario == Scenario::S3) r.s = r.phi.array() - problem.s3_base_coeff * r.u.array().square();
      break;
    }
    case ProblemId::Channel: {
      const ChannelReference ref{problem.power_n, problem.pressure_c, problem.mu0, problem.mu1, problem.height};
      r.u = grid.col(0).unaryExpr([&](double y) { return ref.u(y); });
      r.f = Eigen::VectorXd::Zero(n);
      r.phi = Eigen::VectorXd::Constant(n, problem.pressure_c);
      if (problem.scenario == Scenario::ChannelCorrected) r.s = grid.col(0).unaryExpr([&](double y) { return ref.s(y); });
      break;
    }
  }
  return r;
}

}  // namespace latcorr
