#pragma once

#include <vector>

#include "latcorr/gradkit/ops.hpp"

namespace latcorr::gradkit {

/// Which input derivatives a batch carries: first derivatives per coordinate
/// and pure second derivatives per coordinate. Mixed partials are never carried.
struct DerivSpec {
  std::vector<bool> first;
  std::vector<bool> second;

  static DerivSpec none(int dim);
  static DerivSpec up_to(int dim, int order);

  [[nodiscard]] int dim() const { return static_cast<int>(first.size()); }
  [[nodiscard]] bool any() const;
};

/// A batch of field values (rows = points) with forward-propagated input
/// derivative channels. Channel k of `d` holds d/dx_k, channel k of `d2`
/// holds d^2/dx_k^2. An invalid Var marks a channel that is not tracked.
struct Jet {
  Var value;
  std::vector<Var> d;
  std::vector<Var> d2;

  /// Coordinates themselves: value X (P x D), d_k = e_k, d2_k = 0.
  static Jet input(Tape& tape, const Matrix& coords, const DerivSpec& spec);
  /// Wraps a plain value with no tracked channels for `dim` coordinates.
  static Jet plain(Var value, int dim);

  [[nodiscard]] int dim() const { return static_cast<int>(d.size()); }
  [[nodiscard]] bool has_d(int k) const { return d[k].valid(); }
  [[nodiscard]] bool has_d2(int k) const { return d2[k].valid(); }
  /// Same value, all derivative channels dropped.
  [[nodiscard]] Jet values_only() const { return plain(value, dim()); }
};

/// x * W^T + b on every channel (the bias only enters the value).
Jet affine(const Jet& x, Var weight, Var bias);
/// x * W^T without bias.
Jet linear(const Jet& x, Var weight);
Jet activation(const Jet& x, Activation act);
Jet add(const Jet& a, const Jet& b);
Jet sub(const Jet& a, const Jet& b);
/// Elementwise product with the Leibniz rule on every channel.
Jet cmul(const Jet& a, const Jet& b);
Jet scale(const Jet& a, double c);
/// 1 - a.
Jet one_minus(const Jet& a);
Jet tile_rows(const Jet& a, Index reps);
Jet slice_rows(const Jet& a, Index start, Index count);
/// Clamps the value; derivative channels vanish where the clamp is active.
Jet clamp(const Jet& a, double lo, double hi);

}  // namespace latcorr::gradkit
