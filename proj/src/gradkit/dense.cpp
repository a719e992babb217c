#include "latcorr/gradkit/dense.hpp"

#include <cmath>

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {

std::string DenseNet::weight_name(int layer) const { return prefix + ".W" + std::to_string(layer); }
std::string DenseNet::bias_name(int layer) const { return prefix + ".b" + std::to_string(layer); }

void DenseNet::add_to(ParamLayout& layout) const {
  int in = in_dim;
  for (int l = 0; l < layer_count(); ++l) {
    const int out = l < static_cast<int>(hidden.size()) ? hidden[l] : out_dim;
    layout.add(weight_name(l), out, in);
    layout.add(bias_name(l), 1, out);
    in = out;
  }
}

void DenseNet::init(ParamVector& params, std::mt19937_64& rng) const {
  for (int l = 0; l < layer_count(); ++l) {
    auto w = params.matrix(weight_name(l));
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
    params.matrix(bias_name(l)).setZero();
  }
}

Jet DenseNet::forward(const Jet& x, const BoundParams& p) const {
  if (x.value.cols() != in_dim) throw ConfigError(prefix + ": input width mismatch");
  Jet h = x;
  for (int l = 0; l < layer_count(); ++l) {
    h = affine(h, p[weight_name(l)], p[bias_name(l)]);
    if (l + 1 < layer_count()) h = activation(h, act);
    require_finite(h, prefix + " layer " + std::to_string(l));
  }
  return h;
}

void require_finite(const Jet& j, const std::string& where) {
  auto check = [&](Var v) {
    if (v.valid() && !v.value().allFinite()) throw NumericError("non-finite value in " + where);
  };
  check(j.value);
  for (const Var& v : j.d) check(v);
  for (const Var& v : j.d2) check(v);
}

}  // namespace latcorr::gradkit
