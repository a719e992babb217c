#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace latcorr::gradkit {

enum class Activation { Identity, Tanh, Sigmoid, Softplus, Mish };

/// Derivative of the given order (0..3) of the activation at x.
double activate(Activation act, int order, double x);
/// Elementwise, vectorized form of activate().
Eigen::ArrayXXd activate(Activation act, int order, const Eigen::ArrayXXd& x);
/// Orders 0..max_order at once, sharing the transcendental evaluations.
std::vector<Eigen::ArrayXXd> activate_upto(Activation act, int max_order, const Eigen::ArrayXXd& x);

Activation parse_activation(std::string_view name);
std::string to_string(Activation act);

}  // namespace latcorr::gradkit
