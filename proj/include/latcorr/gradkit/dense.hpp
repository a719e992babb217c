#pragma once

#include <random>
#include <string>
#include <vector>

#include "latcorr/gradkit/jet.hpp"
#include "latcorr/gradkit/params.hpp"

namespace latcorr::gradkit {

/// Fully connected network: hidden layers share one activation, the output
/// layer is affine. Parameters live in slices "<prefix>.W<i>" (out x in) and
/// "<prefix>.b<i>" (1 x out).
struct DenseNet {
  std::string prefix;
  int in_dim = 1;
  std::vector<int> hidden;
  int out_dim = 1;
  Activation act = Activation::Tanh;

  [[nodiscard]] int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  [[nodiscard]] std::string weight_name(int layer) const;
  [[nodiscard]] std::string bias_name(int layer) const;

  void add_to(ParamLayout& layout) const;
  /// Glorot-uniform weights, zero biases.
  void init(ParamVector& params, std::mt19937_64& rng) const;
  [[nodiscard]] Jet forward(const Jet& x, const BoundParams& p) const;
};

/// Throws NumericError naming `where` when any channel holds a non-finite value.
void require_finite(const Jet& j, const std::string& where);

}  // namespace latcorr::gradkit
