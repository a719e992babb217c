#include "latcorr/nets.hpp"

#include <cmath>

#include "latcorr/errors.hpp"

namespace latcorr {

using gradkit::Index;
using gradkit::Matrix;
namespace gk = gradkit;

double softplus(double x) { return gk::activate(Activation::Softplus, 0, x); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ConfigError("softplus_inverse: argument must be positive");
  return y + std::log(-std::expm1(-y));
}

// ---------------------------------------------------------------- encoder

Encoder::Encoder(int input_dim, int latent_dim, int width, int hidden_layers, Activation act)
    : zbar{"enc.zbar", input_dim, std::vector<int>(hidden_layers, width), latent_dim, act},
      confidence{"enc.conf", input_dim, std::vector<int>(hidden_layers, width), latent_dim, act} {}

void Encoder::add_to(ParamLayout& layout) const {
  zbar.add_to(layout);
  confidence.add_to(layout);
}

void Encoder::init(ParamVector& params, std::mt19937_64& rng) const {
  zbar.init(params, rng);
  confidence.init(params, rng);
}

EncodedField Encoder::features(const Jet& x, const BoundParams& p) const {
  EncodedField e;
  e.zbar = zbar.forward(x, p);
  e.m = gk::activation(confidence.forward(x, p), Activation::Sigmoid);
  if (clamp) e.m = gk::clamp(e.m, kConfidenceFloor, 1.0 - kConfidenceFloor);
  return e;
}

Jet mix_latent(const EncodedField& enc, const Jet& z0, Index draws) {
  if (z0.value.rows() != draws * enc.m.value.rows() || z0.value.cols() != enc.m.value.cols()) {
    throw ConfigError("mix_latent: prior batch does not match encoder features");
  }
  const Jet det = gk::cmul(enc.m, enc.zbar);
  const Jet gate = gk::one_minus(enc.m);
  return gk::add(gk::tile_rows(det, draws), gk::cmul(gk::tile_rows(gate, draws), z0));
}

// ---------------------------------------------------------- integral layer

Jet quadrature_weights(Tape& tape, const Matrix& query, const DerivSpec& spec, const Matrix& nodes,
                       Var alpha) {
  if (nodes.rows() == 0) throw ConfigError("quadrature node set is empty");
  if (nodes.cols() != query.cols() || spec.dim() != query.cols()) {
    throw ConfigError("quadrature_weights: dimension mismatch");
  }
  const Index p = query.rows(), nq = nodes.rows();
  const int dim = static_cast<int>(query.cols());
  std::vector<Matrix> diff(dim);
  Matrix sq = Matrix::Zero(p, nq);
  for (int k = 0; k < dim; ++k) {
    diff[k] = query.col(k).replicate(1, nq) - nodes.col(k).transpose().replicate(p, 1);
    sq += diff[k].cwiseAbs2();
  }
  const Var w = gk::row_softmax(gk::scale_by(tape.constant(-sq), alpha));
  Jet out = Jet::plain(w, dim);
  for (int k = 0; k < dim; ++k) {
    if (!spec.first[k]) continue;
    // d log w / dx_k = g_k - sum_q w g_k with g_k = -2 alpha (x_k - x_qk)
    const Var g = gk::scale(gk::scale_by(tape.constant(diff[k]), alpha), -2.0);
    const Var gc = gk::sub_col(g, gk::row_sum(gk::cmul(w, g)));
    out.d[k] = gk::cmul(w, gc);
    if (spec.second[k]) {
      const Var gc2 = gk::square(gc);
      out.d2[k] = gk::cmul(w, gk::sub_col(gc2, gk::row_sum(gk::cmul(w, gc2))));
    }
  }
  return out;
}

Jet integral_term(const Jet& weights, Var node_field, Index draws) {
  const Index nq = weights.value.cols();
  if (node_field.rows() != draws * nq) throw ConfigError("integral_term: node field rows mismatch");
  const Var cols = gk::row_blocks_to_cols(node_field, draws);
  auto apply = [&](Var w) { return gk::col_blocks_to_rows(gk::matmul(w, cols), draws); };
  Jet out = Jet::plain(apply(weights.value), weights.dim());
  for (int k = 0; k < weights.dim(); ++k) {
    if (weights.has_d(k)) out.d[k] = apply(weights.d[k]);
    if (weights.has_d2(k)) out.d2[k] = apply(weights.d2[k]);
  }
  return out;
}

std::string IntegralNet::alpha_name(int layer) const { return prefix + ".alpha" + std::to_string(layer); }

DenseNet IntegralNet::head() const {
  return DenseNet{prefix + ".head", width, std::vector<int>(dense_layers, width), out_dim, act};
}

void IntegralNet::add_to(ParamLayout& layout) const {
  if (integral_layers < 1) throw ConfigError(prefix + ": at least one integral layer is required");
  for (int i = 0; i < integral_layers; ++i) {
    const int in = i == 0 ? in_dim : width;
    const std::string s = std::to_string(i);
    layout.add(prefix + ".W" + s, width, in);
    layout.add(prefix + ".V" + s, width, in);
    layout.add(prefix + ".b" + s, 1, width);
    layout.add(alpha_name(i), 1, 1);
  }
  head().add_to(layout);
}

void IntegralNet::init(ParamVector& params, std::mt19937_64& rng, double lengthscale) const {
  if (!(lengthscale > 0.0)) throw ConfigError(prefix + ": kernel length scale must be positive");
  for (int i = 0; i < integral_layers; ++i) {
    const std::string s = std::to_string(i);
    for (const char* n : {".W", ".V"}) {
      auto w = params.matrix(prefix + n + s);
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index c = 0; c < w.cols(); ++c) {
        for (Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
      }
    }
    params.matrix(prefix + ".b" + s).setZero();
    params.matrix(alpha_name(i))(0, 0) = softplus_inverse(1.0 / (2.0 * lengthscale * lengthscale));
  }
  head().init(params, rng);
}

Var IntegralNet::alpha(const BoundParams& p, int layer) const {
  return gk::activation(p[alpha_name(layer)], Activation::Softplus);
}

Jet IntegralNet::forward(const Jet& query_field, const std::vector<Jet>& query_weights, Var node_field,
                         const std::vector<Var>& node_weights, Index draws, const BoundParams& p) const {
  if (static_cast<int>(query_weights.size()) != integral_layers ||
      static_cast<int>(node_weights.size()) + 1 < integral_layers) {
    throw ConfigError(prefix + ": quadrature weights missing for some layers");
  }
  Jet zq = query_field;
  Var zn = node_field;
  for (int i = 0; i < integral_layers; ++i) {
    const std::string s = std::to_string(i);
    const Var w = p[prefix + ".W" + s];
    const Var v = p[prefix + ".V" + s];
    const Var b = p[prefix + ".b" + s];
    // V commutes with the quadrature sum; integrate whichever field is narrower.
    const bool narrow = zn.cols() < v.rows();
    const Var projected = narrow ? Var() : gk::matmul_nt(zn, v);
    auto integrate = [&](const Jet& weights) {
      return narrow ? gk::linear(integral_term(weights, zn, draws), v) : integral_term(weights, projected, draws);
    };
    Jet pre = gk::add(gk::affine(zq, w, b), integrate(query_weights[i]));
    if (i + 1 < integral_layers) {
      const Jet node_w = Jet::plain(node_weights[i], 0);
      const Var node_pre = gk::add(gk::add_row(gk::matmul_nt(zn, w), b), integrate(node_w).value);
      zn = gk::activation(node_pre, act);
    }
    zq = gk::activation(pre, act);
    gk::require_finite(zq, prefix + " layer " + s);
  }
  return head().forward(zq, p);
}

// -------------------------------------------------------------- correction

CorrectionVariant parse_correction_variant(const std::string& s) {
  if (s == "pointwise") return CorrectionVariant::Pointwise;
  if (s == "integral") return CorrectionVariant::Integral;
  throw ConfigError("unknown correction variant '" + s + "'");
}

std::string to_string(CorrectionVariant v) { return v == CorrectionVariant::Pointwise ? "pointwise" : "integral"; }

CorrectionInput parse_correction_input(const std::string& s) {
  if (s == "latent") return CorrectionInput::Latent;
  if (s == "solution_mean") return CorrectionInput::SolutionMean;
  throw ConfigError("unknown correction input '" + s + "'");
}

std::string to_string(CorrectionInput v) { return v == CorrectionInput::Latent ? "latent" : "solution_mean"; }

Correction Correction::pointwise(int latent_dim, int width, int layers, Activation act, CorrectionInput input) {
  Correction c;
  c.variant = CorrectionVariant::Pointwise;
  c.input = input;
  const int in = input == CorrectionInput::Latent ? latent_dim : 1;
  c.mlp = DenseNet{"corr", in, std::vector<int>(layers, width), 1, act};
  return c;
}

Correction Correction::integral_operator(int latent_dim, int width, int layers, Activation act) {
  if (layers < 1) throw ConfigError("integral correction needs at least one layer");
  Correction c;
  c.variant = CorrectionVariant::Integral;
  c.integral = IntegralNet{"corr", latent_dim, width, 1, layers - 1, 1, act};
  return c;
}

void Correction::add_to(ParamLayout& layout) const {
  if (variant == CorrectionVariant::Pointwise) {
    mlp.add_to(layout);
  } else {
    integral.add_to(layout);
  }
}

void Correction::init(ParamVector& params, std::mt19937_64& rng, double lengthscale) const {
  if (variant == CorrectionVariant::Pointwise) {
    mlp.init(params, rng);
  } else {
    integral.init(params, rng, lengthscale);
  }
}

Var Correction::pointwise_forward(Var field, const BoundParams& p) const {
  if (variant != CorrectionVariant::Pointwise) throw ConfigError("pointwise_forward on an integral correction");
  return mlp.forward(Jet::plain(field, 0), p).value;
}

void Correction::zero_output(ParamVector& params) const {
  const DenseNet net = variant == CorrectionVariant::Pointwise ? mlp : integral.head();
  const int last = net.layer_count() - 1;
  params.matrix(net.weight_name(last)).setZero();
  params.matrix(net.bias_name(last)).setZero();
}

// --------------------------------------------------------------- variance

VarianceMode parse_variance_mode(const std::string& s) {
  if (s == "constant") return VarianceMode::Constant;
  if (s == "mlp") return VarianceMode::Mlp;
  throw ConfigError("unknown variance mode '" + s + "'");
}

std::string to_string(VarianceMode m) { return m == VarianceMode::Constant ? "constant" : "mlp"; }

VarianceHead::VarianceHead(std::string prefix_, VarianceMode mode_, int input_dim, int width)
    : prefix(std::move(prefix_)), mode(mode_), mlp{prefix + ".mlp", input_dim, {width, width}, 1, Activation::Tanh} {}

void VarianceHead::add_to(ParamLayout& layout) const {
  if (mode == VarianceMode::Constant) {
    layout.add(prefix + ".raw", 1, 1);
  } else {
    mlp.add_to(layout);
  }
}

void VarianceHead::init(ParamVector& params, std::mt19937_64& rng, double sigma0) const {
  const double raw = softplus_inverse(sigma0);
  if (mode == VarianceMode::Constant) {
    params.matrix(prefix + ".raw")(0, 0) = raw;
    return;
  }
  mlp.init(params, rng);
  const int last = mlp.layer_count() - 1;
  params.matrix(mlp.weight_name(last)).setZero();
  params.matrix(mlp.bias_name(last))(0, 0) = raw;
}

Var VarianceHead::sigma(Tape& tape, const Matrix& coords, const BoundParams& p) const {
  if (mode == VarianceMode::Constant) {
    return gk::activation(gk::tile_rows(p[prefix + ".raw"], coords.rows()), Activation::Softplus);
  }
  const Jet x = Jet::plain(tape.constant(coords), 0);
  return gk::activation(mlp.forward(x, p).value, Activation::Softplus);
}

bool VarianceHead::owns(const std::string& slice) const { return slice.rfind(prefix + ".", 0) == 0; }

VarianceHeads::VarianceHeads(VarianceMode mode, int input_dim, int width) {
  for (const char* q : {"u", "f", "b"}) {
    heads_.emplace(q, VarianceHead(std::string("sigma_") + q, mode, input_dim, width));
  }
}

const VarianceHead& VarianceHeads::head(const std::string& quantity) const {
  const auto it = heads_.find(quantity);
  if (it == heads_.end()) throw ConfigError("unknown variance quantity '" + quantity + "'");
  return it->second;
}

void VarianceHeads::add_to(ParamLayout& layout) const {
  for (const auto& [q, h] : heads_) h.add_to(layout);
}

void VarianceHeads::init(ParamVector& params, std::mt19937_64& rng, const std::map<std::string, double>& sigma0) const {
  for (const auto& [q, h] : heads_) h.init(params, rng, sigma0.at(q));
}

bool VarianceHeads::owns(const std::string& slice) const {
  for (const auto& [q, h] : heads_) {
    if (h.owns(slice)) return true;
  }
  return false;
}

Var VarianceHeads::sigma(const std::string& quantity, Tape& tape, const Matrix& coords, const BoundParams& p) const {
  return head(quantity).sigma(tape, coords, p);
}

}  // namespace latcorr
