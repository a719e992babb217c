#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace latcorr {

/// n evenly spaced points from a to b inclusive.
Eigen::VectorXd linspace(double a, double b, Eigen::Index n);

/// Natural cubic spline through (x_i, y_i); x must be strictly increasing.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y);

  [[nodiscard]] double operator()(double t) const;
  [[nodiscard]] Eigen::VectorXd operator()(const Eigen::VectorXd& t) const;
  [[nodiscard]] double lo() const { return x_[0]; }
  [[nodiscard]] double hi() const { return x_[x_.size() - 1]; }

 private:
  Eigen::VectorXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd m_;  // second derivatives at the knots
};

/// Classical fixed-step RK4 for u' = rhs(t, u); returns u at t0 + k*h, k = 0..steps.
std::vector<double> rk4(const std::function<double(double, double)>& rhs, double u0, double t0, double t1,
                        Eigen::Index steps);

}  // namespace latcorr
