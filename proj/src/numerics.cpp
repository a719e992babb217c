#include "latcorr/numerics.hpp"

#include <algorithm>

#include "latcorr/errors.hpp"

namespace latcorr {

Eigen::VectorXd linspace(double a, double b, Eigen::Index n) {
  if (n < 1) throw ConfigError("linspace: need at least one point");
  if (n == 1) return Eigen::VectorXd::Constant(1, a);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  v[n - 1] = b;
  return v;
}

CubicSpline::CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
  const Eigen::Index n = x_.size();
  if (n < 2 || y_.size() != n) throw ConfigError("CubicSpline: need matching x and y with at least two knots");
  for (Eigen::Index i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) throw DomainError("CubicSpline: knots must be strictly increasing");
  }
  m_ = Eigen::VectorXd::Zero(n);
  if (n == 2) return;
  // Thomas algorithm on the interior second-derivative system.
  const Eigen::Index k = n - 2;
  Eigen::VectorXd diag(k), upper(k), rhs(k);
  for (Eigen::Index i = 1; i <= k; ++i) {
    const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  for (Eigen::Index i = 1; i < k; ++i) {
    const double lower = x_[i + 1] - x_[i];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (Eigen::Index i = k - 2; i >= 0; --i) m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
}

double CubicSpline::operator()(double t) const {
  const Eigen::Index n = x_.size();
  const double* begin = x_.data();
  Eigen::Index i = std::upper_bound(begin, begin + n, t) - begin - 1;
  i = std::clamp<Eigen::Index>(i, 0, n - 2);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - t) / h;
  const double b = (t - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

Eigen::VectorXd CubicSpline::operator()(const Eigen::VectorXd& t) const {
  Eigen::VectorXd out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = (*this)(t[i]);
  return out;
}

std::vector<double> rk4(const std::function<double(double, double)>& rhs, double u0, double t0, double t1,
                        Eigen::Index steps) {
  if (steps < 1) throw ConfigError("rk4: need at least one step");
  const double h = (t1 - t0) / static_cast<double>(steps);
  std::vector<double> u(static_cast<std::size_t>(steps) + 1);
  u[0] = u0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    const double y = u[k];
    const double k1 = rhs(t, y);
    const double k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
    const double k4 = rhs(t + h, y + h * k3);
    u[k + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

}  // namespace latcorr
