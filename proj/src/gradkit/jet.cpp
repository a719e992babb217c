#include "latcorr/gradkit/jet.hpp"

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {
namespace {

template <typename F>
std::vector<Var> map_channels(const std::vector<Var>& in, F f) {
  std::vector<Var> out(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (in[k].valid()) out[k] = f(in[k]);
  }
  return out;
}

void require_same_structure(const Jet& a, const Jet& b) {
  if (a.dim() != b.dim()) throw ConfigError("jet: coordinate count mismatch");
  for (int k = 0; k < a.dim(); ++k) {
    if (a.has_d(k) != b.has_d(k) || a.has_d2(k) != b.has_d2(k)) {
      throw ConfigError("jet: tracked channels differ between operands");
    }
  }
}

}  // namespace

DerivSpec DerivSpec::none(int dim) {
  return DerivSpec{std::vector<bool>(dim, false), std::vector<bool>(dim, false)};
}

DerivSpec DerivSpec::up_to(int dim, int order) {
  if (order < 0 || order > 2) throw ConfigError("derivative order must be 0, 1 or 2");
  return DerivSpec{std::vector<bool>(dim, order >= 1), std::vector<bool>(dim, order >= 2)};
}

bool DerivSpec::any() const {
  for (bool b : first) {
    if (b) return true;
  }
  return false;
}

Jet Jet::input(Tape& tape, const Matrix& coords, const DerivSpec& spec) {
  const int dim = static_cast<int>(coords.cols());
  if (spec.dim() != dim || static_cast<int>(spec.second.size()) != dim) {
    throw ConfigError("Jet::input: derivative spec does not match coordinate dimension");
  }
  Jet j;
  j.value = tape.constant(coords);
  j.d.resize(dim);
  j.d2.resize(dim);
  for (int k = 0; k < dim; ++k) {
    if (spec.second[k] && !spec.first[k]) {
      throw ConfigError("Jet::input: second derivative requires the first");
    }
    if (spec.first[k]) {
      Matrix e = Matrix::Zero(coords.rows(), dim);
      e.col(k).setOnes();
      j.d[k] = tape.constant(std::move(e));
    }
    if (spec.second[k]) j.d2[k] = tape.constant(Matrix::Zero(coords.rows(), dim));
  }
  return j;
}

Jet Jet::plain(Var value, int dim) {
  Jet j;
  j.value = value;
  j.d.resize(dim);
  j.d2.resize(dim);
  return j;
}

Jet affine(const Jet& x, Var weight, Var bias) {
  Jet y = linear(x, weight);
  y.value = add_row(y.value, bias);
  return y;
}

Jet linear(const Jet& x, Var weight) {
  Jet y;
  y.value = matmul_nt(x.value, weight);
  y.d = map_channels(x.d, [&](Var c) { return matmul_nt(c, weight); });
  y.d2 = map_channels(x.d2, [&](Var c) { return matmul_nt(c, weight); });
  return y;
}

Jet activation(const Jet& x, Activation act) {
  bool need_s1 = false, need_s2 = false;
  for (int k = 0; k < x.dim(); ++k) {
    need_s1 = need_s1 || x.has_d(k);
    need_s2 = need_s2 || x.has_d2(k);
  }
  const std::vector<Var> s = activation_orders(x.value, act, need_s2 ? 3 : (need_s1 ? 2 : 1));
  Jet y = Jet::plain(s[0], x.dim());
  if (!need_s1) return y;
  const Var s1 = s[1];
  const Var s2 = need_s2 ? s[2] : Var();
  for (int k = 0; k < x.dim(); ++k) {
    if (!x.has_d(k)) continue;
    y.d[k] = gradkit::cmul(s1, x.d[k]);
    if (x.has_d2(k)) {
      y.d2[k] = gradkit::add(gradkit::cmul(s2, gradkit::square(x.d[k])), gradkit::cmul(s1, x.d2[k]));
    }
  }
  return y;
}

Jet add(const Jet& a, const Jet& b) {
  require_same_structure(a, b);
  Jet y = Jet::plain(gradkit::add(a.value, b.value), a.dim());
  for (int k = 0; k < a.dim(); ++k) {
    if (a.has_d(k)) y.d[k] = gradkit::add(a.d[k], b.d[k]);
    if (a.has_d2(k)) y.d2[k] = gradkit::add(a.d2[k], b.d2[k]);
  }
  return y;
}

Jet sub(const Jet& a, const Jet& b) {
  require_same_structure(a, b);
  Jet y = Jet::plain(gradkit::sub(a.value, b.value), a.dim());
  for (int k = 0; k < a.dim(); ++k) {
    if (a.has_d(k)) y.d[k] = gradkit::sub(a.d[k], b.d[k]);
    if (a.has_d2(k)) y.d2[k] = gradkit::sub(a.d2[k], b.d2[k]);
  }
  return y;
}

Jet cmul(const Jet& a, const Jet& b) {
  require_same_structure(a, b);
  Jet y = Jet::plain(gradkit::cmul(a.value, b.value), a.dim());
  for (int k = 0; k < a.dim(); ++k) {
    if (!a.has_d(k)) continue;
    y.d[k] = gradkit::add(gradkit::cmul(a.d[k], b.value), gradkit::cmul(a.value, b.d[k]));
    if (a.has_d2(k)) {
      // (ab)'' = a''b + 2a'b' + ab''
      y.d2[k] = gradkit::add(
          gradkit::add(gradkit::cmul(a.d2[k], b.value), gradkit::scale(gradkit::cmul(a.d[k], b.d[k]), 2.0)),
          gradkit::cmul(a.value, b.d2[k]));
    }
  }
  return y;
}

Jet scale(const Jet& a, double c) {
  Jet y = Jet::plain(gradkit::scale(a.value, c), a.dim());
  y.d = map_channels(a.d, [c](Var v) { return gradkit::scale(v, c); });
  y.d2 = map_channels(a.d2, [c](Var v) { return gradkit::scale(v, c); });
  return y;
}

Jet one_minus(const Jet& a) {
  Jet y = scale(a, -1.0);
  y.value = shift(y.value, 1.0);
  return y;
}

Jet tile_rows(const Jet& a, Index reps) {
  Jet y = Jet::plain(gradkit::tile_rows(a.value, reps), a.dim());
  y.d = map_channels(a.d, [reps](Var v) { return gradkit::tile_rows(v, reps); });
  y.d2 = map_channels(a.d2, [reps](Var v) { return gradkit::tile_rows(v, reps); });
  return y;
}

Jet slice_rows(const Jet& a, Index start, Index count) {
  auto f = [start, count](Var v) { return gradkit::slice_rows(v, start, count); };
  Jet y = Jet::plain(f(a.value), a.dim());
  y.d = map_channels(a.d, f);
  y.d2 = map_channels(a.d2, f);
  return y;
}

Jet clamp(const Jet& a, double lo, double hi) {
  Jet y = Jet::plain(gradkit::clamp(a.value, lo, hi), a.dim());
  bool any = false;
  for (int k = 0; k < a.dim(); ++k) any = any || a.has_d(k);
  if (!any) return y;
  const auto& v = a.value.value().array();
  const Var mask = a.value.tape().constant(((v > lo) && (v < hi)).cast<double>().matrix());
  y.d = map_channels(a.d, [mask](Var c) { return gradkit::cmul(c, mask); });
  y.d2 = map_channels(a.d2, [mask](Var c) { return gradkit::cmul(c, mask); });
  return y;
}

}  // namespace latcorr::gradkit
