#include "latcorr/gradkit/activation.hpp"

#include <algorithm>
#include <cmath>

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // log(1 + e^x) without overflow
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Derivatives of sigmoid written in terms of s = sigmoid(x).
double sigmoid_d(int order, double s) {
  switch (order) {
    case 0: return s;
    case 1: return s * (1.0 - s);
    case 2: return s * (1.0 - s) * (1.0 - 2.0 * s);
    case 3: return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s);
    default: break;
  }
  throw ConfigError("activation derivative order > 3");
}

double tanh_d(int order, double t) {
  const double sech2 = 1.0 - t * t;
  switch (order) {
    case 0: return t;
    case 1: return sech2;
    case 2: return -2.0 * t * sech2;
    case 3: return sech2 * (6.0 * t * t - 2.0);
    default: break;
  }
  throw ConfigError("activation derivative order > 3");
}

// mish(x) = x * tanh(softplus(x)); with g = tanh(softplus(x)),
// mish^(k) = k * g^(k-1) + x * g^(k).
double mish(int order, double x) {
  const double sp = softplus(x);
  const double s1 = sigmoid(x);
  const double s2 = s1 * (1.0 - s1);
  const double s3 = s2 * (1.0 - 2.0 * s1);
  const double t = std::tanh(sp);
  const double h1 = tanh_d(1, t);
  const double h2 = tanh_d(2, t);
  const double h3 = tanh_d(3, t);
  const double g0 = t;
  const double g1 = h1 * s1;
  const double g2 = h2 * s1 * s1 + h1 * s2;
  const double g3 = h3 * s1 * s1 * s1 + 3.0 * h2 * s1 * s2 + h1 * s3;
  switch (order) {
    case 0: return x * g0;
    case 1: return g0 + x * g1;
    case 2: return 2.0 * g1 + x * g2;
    case 3: return 3.0 * g2 + x * g3;
    default: break;
  }
  throw ConfigError("activation derivative order > 3");
}

using Array = Eigen::ArrayXXd;

Array sigmoid_d(int order, const Array& s) {
  switch (order) {
    case 0: return s;
    case 1: return s * (1.0 - s);
    case 2: return s * (1.0 - s) * (1.0 - 2.0 * s);
    case 3: return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s.square());
    default: break;
  }
  throw ConfigError("activation derivative order > 3");
}

Array tanh_d(int order, const Array& t) {
  const Array sech2 = 1.0 - t.square();
  switch (order) {
    case 0: return t;
    case 1: return sech2;
    case 2: return -2.0 * t * sech2;
    case 3: return sech2 * (6.0 * t.square() - 2.0);
    default: break;
  }
  throw ConfigError("activation derivative order > 3");
}

Array sigmoid(const Array& x) { return 1.0 / (1.0 + (-x).min(700.0).exp()); }

// tanh(softplus(x)) = n / (n + 2) with n = e^x (e^x + 2); one exponential
// serves every factor. Fills orders 0..max_order.
std::vector<Array> mish_upto(int max_order, const Array& x) {
  if (max_order > 3) throw ConfigError("activation derivative order > 3");
  std::vector<Array> out;
  const Array e = x.min(30.0).exp();
  const Array n = e * (e + 2.0);
  const Array den = n + 2.0;
  const Array g0 = n / den;
  out.push_back(x * g0);
  if (max_order == 0) return out;
  const Array h1 = 4.0 * (n + 1.0) / den.square();
  const Array s1 = e / (1.0 + e);
  const Array g1 = h1 * s1;
  out.push_back(g0 + x * g1);
  if (max_order == 1) return out;
  const Array s2 = e / (1.0 + e).square();
  const Array h2 = -2.0 * g0 * h1;
  const Array g2 = h2 * s1.square() + h1 * s2;
  out.push_back(2.0 * g1 + x * g2);
  if (max_order == 2) return out;
  const Array s3 = s2 * (1.0 - 2.0 * s1);
  const Array h3 = h1 * (6.0 * g0.square() - 2.0);
  const Array g3 = h3 * s1.cube() + 3.0 * h2 * s1 * s2 + h1 * s3;
  out.push_back(3.0 * g2 + x * g3);
  return out;
}

}  // namespace

Eigen::ArrayXXd activate(Activation act, int order, const Eigen::ArrayXXd& x) {
  if (act == Activation::Mish) return activate_upto(act, order, x)[static_cast<std::size_t>(order)];
  switch (act) {
    case Activation::Identity:
      if (order == 0) return x;
      return Array::Constant(x.rows(), x.cols(), order == 1 ? 1.0 : 0.0);
    case Activation::Tanh:
      return tanh_d(order, x.tanh());
    case Activation::Sigmoid:
      return sigmoid_d(order, sigmoid(x));
    case Activation::Softplus:
      if (order == 0) return x.max(0.0) + (-x.abs()).exp().log1p();
      return sigmoid_d(order - 1, sigmoid(x));
    case Activation::Mish:
      return mish_upto(order, x)[static_cast<std::size_t>(order)];
  }
  throw ConfigError("unknown activation");
}

namespace {

std::vector<Array> upto_block(Activation act, int max_order, const Array& x) {
  std::vector<Array> out;
  switch (act) {
    case Activation::Mish:
      return mish_upto(max_order, x);
    case Activation::Tanh: {
      const Array t = x.tanh();
      for (int k = 0; k <= max_order; ++k) out.push_back(tanh_d(k, t));
      return out;
    }
    case Activation::Sigmoid: {
      const Array s = sigmoid(x);
      for (int k = 0; k <= max_order; ++k) out.push_back(sigmoid_d(k, s));
      return out;
    }
    case Activation::Softplus: {
      out.push_back(activate(act, 0, x));
      if (max_order == 0) return out;
      const Array s = sigmoid(x);
      for (int k = 1; k <= max_order; ++k) out.push_back(sigmoid_d(k - 1, s));
      return out;
    }
    case Activation::Identity:
      for (int k = 0; k <= max_order; ++k) out.push_back(activate(act, k, x));
      return out;
  }
  throw ConfigError("unknown activation");
}

}  // namespace

// Works through the input in cache-sized pieces so the many intermediate
// arrays stay resident.
std::vector<Eigen::ArrayXXd> activate_upto(Activation act, int max_order, const Eigen::ArrayXXd& x) {
  if (max_order < 0 || max_order > 3) throw ConfigError("activation derivative order must be 0..3");
  constexpr Eigen::Index kChunk = 1024;
  std::vector<Array> out(static_cast<std::size_t>(max_order) + 1, Array(x.rows(), x.cols()));
  for (Eigen::Index off = 0; off < x.size(); off += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.size() - off);
    const std::vector<Array> part = upto_block(act, max_order, Eigen::Map<const Array>(x.data() + off, n, 1));
    for (std::size_t k = 0; k < out.size(); ++k) Eigen::Map<Array>(out[k].data() + off, n, 1) = part[k];
  }
  return out;
}

double activate(Activation act, int order, double x) {
  switch (act) {
    case Activation::Identity:
      return order == 0 ? x : (order == 1 ? 1.0 : 0.0);
    case Activation::Tanh:
      return tanh_d(order, std::tanh(x));
    case Activation::Sigmoid:
      return sigmoid_d(order, sigmoid(x));
    case Activation::Softplus:
      return order == 0 ? softplus(x) : sigmoid_d(order - 1, sigmoid(x));
    case Activation::Mish:
      return mish(order, x);
  }
  throw ConfigError("unknown activation");
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softplus") return Activation::Softplus;
  if (name == "mish") return Activation::Mish;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softplus: return "softplus";
    case Activation::Mish: return "mish";
  }
  return "?";
}

}  // namespace latcorr::gradkit
