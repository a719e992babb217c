#include <doctest.h>

#include <cmath>
#include <numbers>

#include "latcorr/errors.hpp"
#include "latcorr/problems.hpp"

using namespace latcorr;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd col(std::initializer_list<double> v) {
  Eigen::VectorXd r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

double sample_std(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("linspace endpoints and spacing") {
  const auto v = linspace(-1.0, 2.0, 7);
  CHECK(v[0] == -1.0);
  CHECK(v[6] == 2.0);
  CHECK(v[3] == doctest::Approx(0.5));
  CHECK(linspace(3.0, 4.0, 1)[0] == 3.0);
  CHECK_THROWS_AS((void)linspace(0.0, 1.0, 0), ConfigError);
}

TEST_CASE("cubic spline interpolates and is exact for lines") {
  const Eigen::VectorXd x = col({0.0, 0.3, 0.45, 1.0, 1.7});
  const Eigen::VectorXd y = (2.0 * x.array() - 0.5).matrix();
  const CubicSpline sp(x, y);
  for (double t : {0.0, 0.1, 0.3, 0.9, 1.7}) CHECK(sp(t) == doctest::Approx(2.0 * t - 0.5).epsilon(1e-13));

  const Eigen::VectorXd xs = linspace(0.0, kPi, 201);
  const CubicSpline s2(xs, xs.array().sin().matrix());
  double worst = 0.0;
  for (double t = 0.01; t < kPi; t += 0.0371) worst = std::max(worst, std::abs(s2(t) - std::sin(t)));
  CHECK(worst < 1e-7);
  for (Index i = 0; i < xs.size(); ++i) CHECK(s2(xs[i]) == doctest::Approx(std::sin(xs[i])).epsilon(1e-14));

  CHECK_THROWS_AS(CubicSpline(col({0.0, 0.0, 1.0}), col({1.0, 2.0, 3.0})), DomainError);
  CHECK_THROWS_AS(CubicSpline(col({0.0}), col({1.0})), ConfigError);
}

TEST_CASE("rk4 is fourth order") {
  auto rhs = [](double t, double u) { return std::cos(t) - 0.5 * u; };
  // reference with a much finer step
  const double exact = rk4(rhs, 1.0, 0.0, 2.0, 20000).back();
  const double e1 = std::abs(rk4(rhs, 1.0, 0.0, 2.0, 20).back() - exact);
  const double e2 = std::abs(rk4(rhs, 1.0, 0.0, 2.0, 40).back() - exact);
  const double ratio = e1 / e2;
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("ode reference") {
  const OdeReference ref;
  CHECK(ref.u(0.0) == 0.0);
  CHECK(OdeReference::forcing(1.0 / 6.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ref.lambda() == 1.5);

  const OdeReference linear(0.0);
  double worst = 0.0;
  for (double t = 0.0; t <= 1.0; t += 0.013) {
    worst = std::max(worst, std::abs(linear.u(t) - (1.0 - std::cos(3.0 * kPi * t)) / (3.0 * kPi)));
  }
  CHECK(worst < 1e-8);

  // residual of the S1 operator at the true rate
  const ProblemSpec p = make_problem(ProblemId::Ode, Scenario::S1);
  const double h = 1e-4;
  for (double t : {0.1, 0.37, 0.8}) {
    gradkit::JetValue j;
    j.value = ref.u(t);
    j.d_input = {(ref.u(t + h) - ref.u(t - h)) / (2.0 * h)};
    const double r = apply_operator(p, j, 1.5);
    CHECK(std::abs(r - OdeReference::forcing(t)) < 1e-3);
  }
}

TEST_CASE("reaction-diffusion reference") {
  const RdReference ref;
  Matrix pts(6, 2);
  pts << 0.5, 0.0, 0.25, 0.0, 0.0, 0.4, 1.0, 0.7, 0.5, 1.0, 0.3, 0.6;
  const auto u = ref.u(pts);
  CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(u[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(u[2]) < 1e-14);
  CHECK(std::abs(u[3]) < 1e-14);
  CHECK(u[4] > 0.5);  // logistic growth dominates the weak diffusion
  CHECK(u[4] < 1.0);

  const RdReference fine(0.01, 2.0, 801, 2.5e-5);
  const auto uf = fine.u(pts);
  CHECK((u - uf).cwiseAbs().maxCoeff() < 1e-5);

  // independence from the set of requested times
  Matrix one(1, 2);
  one << 0.3, 0.6;
  CHECK(std::abs(ref.u(one)[0] - u[5]) < 1e-12);

  // S1 operator residual vanishes on the reference
  const ProblemSpec p = make_problem(ProblemId::ReactionDiffusion, Scenario::S1);
  const double hx = 1e-2, ht = 1e-3;
  Matrix st(5, 2);
  const double x = 0.37, t = 0.55;
  st << x, t, x + hx, t, x - hx, t, x, t + ht, x, t - ht;
  const auto v = ref.u(st);
  gradkit::JetValue j;
  j.value = v[0];
  j.d_input = {(v[1] - v[2]) / (2.0 * hx), (v[3] - v[4]) / (2.0 * ht)};
  j.d2_input = {(v[1] - 2.0 * v[0] + v[2]) / (hx * hx), 0.0};
  CHECK(std::abs(apply_operator(p, j, 2.0)) < 1e-3);

  Matrix bad(1, 2);
  bad << 0.5, -0.1;
  CHECK_THROWS_AS((void)ref.u(bad), DomainError);
}

TEST_CASE("channel reference closed form") {
  const ChannelReference ref;
  CHECK(std::abs(ref.u(0.5)) < 1e-15);
  CHECK(std::abs(ref.u(-0.5)) < 1e-15);
  CHECK(ref.u(0.0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(ref.s(0.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(ref.s(0.5) == doctest::Approx(-0.2).epsilon(1e-13));
  CHECK(ref.s(-0.3) == doctest::Approx(6.4 * 0.027 - 1.0).epsilon(1e-13));
  const double h = 1e-4;
  for (double y : {-0.4, 0.1, 0.33}) {
    const double fd = (ref.u(y + h) - 2.0 * ref.u(y) + ref.u(y - h)) / (h * h);
    CHECK(fd == doctest::Approx(ref.d2u(y)).epsilon(1e-5));
  }

  // corrected residual with the exact discrepancy gives a zero forcing mean
  const ProblemSpec p = make_problem(ProblemId::Channel, Scenario::ChannelCorrected);
  for (double y : {-0.45, 0.0, 0.2}) {
    gradkit::JetValue j;
    j.value = ref.u(y);
    j.d_input = {0.0};
    j.d2_input = {ref.d2u(y)};
    const double r = apply_operator(p, j);
    CHECK(std::abs(forcing_mean(p, r, ref.s(y))) < 1e-6);
  }
}

TEST_CASE("boundary mean and gaussian log density") {
  const ProblemSpec ode = make_problem(ProblemId::Ode, Scenario::S1);
  CHECK(boundary_mean(ode, col({0.0}), 0.25) == 0.25);
  CHECK_THROWS_AS((void)boundary_mean(ode, col({0.5}), 0.0), DomainError);
  const ProblemSpec rd = make_problem(ProblemId::ReactionDiffusion, Scenario::S1);
  CHECK(boundary_mean(rd, col({1.0, 0.3}), -0.1) == -0.1);
  CHECK_THROWS_AS((void)boundary_mean(rd, col({0.4, 0.3}), 0.0), DomainError);
  const ProblemSpec ch = make_problem(ProblemId::Channel, Scenario::ChannelNewtonian);
  CHECK(boundary_mean(ch, col({-0.5}), 0.0) == 0.0);

  CHECK(gaussian_logpdf(0.0, {0.0, 1.0}) == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(gaussian_logpdf(1.0, {0.0, 1.0}) == doctest::Approx(-1.418939).epsilon(1e-6));
  CHECK_THROWS_AS((void)gaussian_logpdf(0.0, {0.0, 0.0}), ConfigError);
}

TEST_CASE("ode data generation") {
  ScenarioConfig c;
  c.n_u = 40;
  c.n_f = 30;
  c.seed = 9;
  const DataSet d = generate(c);
  CHECK(d.u.size() == 40);
  CHECK(d.f.size() == 30);
  CHECK(d.b.size() == 1);
  CHECK(d.b.x(0, 0) == 0.0);
  CHECK(d.b.y[0] == 0.0);
  CHECK(d.u.x.minCoeff() >= 0.0);
  CHECK(d.u.x.maxCoeff() <= 1.0);
  const OdeReference ref;
  for (Index i = 0; i < d.u.size(); ++i) CHECK(d.u.y[i] == ref.u(d.u.x(i, 0)));
  for (Index i = 0; i < d.f.size(); ++i) CHECK(d.f.y[i] == OdeReference::forcing(d.f.x(i, 0)));

  const DataSet again = generate(c);
  CHECK(again.u.x == d.u.x);
  c.seed = 10;
  CHECK(generate(c).u.x != d.u.x);

  c.n_u = -1;
  CHECK_THROWS_AS((void)generate(c), ConfigError);
}

TEST_CASE("reaction-diffusion data layout") {
  ScenarioConfig c;
  c.problem = ProblemId::ReactionDiffusion;
  c.n_b = 5;
  const DataSet d = generate(c);
  CHECK(d.u.size() == 121);
  CHECK(d.f.size() == 13 * 15);
  CHECK(d.b.size() == 5 + 2 * 4);
  CHECK(d.f.y.cwiseAbs().maxCoeff() == 0.0);
  const ProblemSpec p = make_problem(ProblemId::ReactionDiffusion, Scenario::S1);
  for (Index i = 0; i < d.b.size(); ++i) {
    CHECK(p.on_boundary(Eigen::VectorXd(d.b.x.row(i).transpose())));
    CHECK(d.b.y[i] == doctest::Approx(RdReference::initial(d.b.x(i, 0)) * (d.b.x(i, 1) == 0.0)));
  }
  CHECK_THROWS_AS((void)make_problem(ProblemId::ReactionDiffusion, Scenario::ChannelCorrected), ConfigError);
}

TEST_CASE("channel data") {
  ScenarioConfig c;
  c.problem = ProblemId::Channel;
  c.scenario = Scenario::ChannelCorrected;
  c.n_u = 30;
  c.n_f = 51;
  const DataSet d = generate(c);
  CHECK(d.u.size() == 30);
  CHECK(d.f.size() == 51);
  CHECK(d.b.size() == 2);
  CHECK(d.f.y.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.u.y.maxCoeff() <= 0.1);
  CHECK(d.u.y.minCoeff() >= 0.0);
}

TEST_CASE("additive noise") {
  ScenarioConfig c;
  c.n_u = 50;
  c.n_f = 50;
  const DataSet clean = generate(c);
  const DataSet zero = add_noise(clean, 0.0, 0.0, 0.0, 4);
  CHECK(zero.u.y == clean.u.y);
  CHECK(zero.f.y == clean.f.y);

  const DataSet a = add_noise(clean, 0.01, 0.05, 0.0, 4);
  const DataSet b = add_noise(clean, 0.01, 0.05, 0.0, 4);
  CHECK(a.u.y == b.u.y);
  CHECK(a.noise_f == 0.05);
  CHECK(a.b.y == clean.b.y);
  CHECK_THROWS_AS((void)add_noise(clean, -1.0, 0.0, 0.0, 1), ConfigError);

  DataSet big;
  big.u.x = Matrix::Zero(100000, 1);
  big.u.y = Eigen::VectorXd::Zero(100000);
  const DataSet nb = add_noise(big, 0.05, 0.0, 0.0, 11);
  CHECK(std::abs(sample_std(nb.u.y) / 0.05 - 1.0) < 0.02);
  CHECK(std::abs(nb.u.y.mean()) < 3.0 * 0.05 / std::sqrt(1e5));
}

TEST_CASE("reference fields") {
  const ProblemSpec p = make_problem(ProblemId::Ode, Scenario::S3);
  const Matrix grid = linspace(0.0, 1.0, 11);
  const auto r = reference_fields(p, grid);
  for (Index i = 0; i < 11; ++i) {
    const double u = r.u[i];
    CHECK(r.phi[i] == doctest::Approx(1.5 * u * (1.0 - u)));
    CHECK(r.s[i] == doctest::Approx(1.5 * u * (1.0 - u) - 0.2 * std::cos(u)));
  }
  const auto r1 = reference_fields(make_problem(ProblemId::Ode, Scenario::S1), grid);
  CHECK(std::isnan(r1.s[3]));

  const ProblemSpec ch = make_problem(ProblemId::Channel, Scenario::ChannelCorrected);
  const auto rc = reference_fields(ch, linspace(-0.5, 0.5, 5));
  CHECK(rc.s[2] == doctest::Approx(-1.0));
  CHECK(rc.phi[0] == -1.0);
}
