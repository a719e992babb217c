#include "latcorr/model.hpp"

#include <cmath>
#include <numbers>

#include "latcorr/errors.hpp"

namespace latcorr {

namespace gk = gradkit;

ProblemId parse_problem_id(const std::string& s) {
  if (s == "ode") return ProblemId::Ode;
  if (s == "reaction_diffusion") return ProblemId::ReactionDiffusion;
  if (s == "channel") return ProblemId::Channel;
  throw ConfigError("unknown problem '" + s + "'");
}

std::string to_string(ProblemId p) {
  switch (p) {
    case ProblemId::Ode: return "ode";
    case ProblemId::ReactionDiffusion: return "reaction_diffusion";
    case ProblemId::Channel: return "channel";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "S1") return Scenario::S1;
  if (s == "S2") return Scenario::S2;
  if (s == "S3") return Scenario::S3;
  if (s == "channel_newtonian") return Scenario::ChannelNewtonian;
  if (s == "channel_corrected") return Scenario::ChannelCorrected;
  if (s == "channel_learned_viscosity") return Scenario::ChannelLearnedViscosity;
  throw ConfigError("unknown scenario '" + s + "'");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    case Scenario::S3: return "S3";
    case Scenario::ChannelNewtonian: return "channel_newtonian";
    case Scenario::ChannelCorrected: return "channel_corrected";
    case Scenario::ChannelLearnedViscosity: return "channel_learned_viscosity";
  }
  return "?";
}

bool Domain::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo.size()) return false;
  return ((x.array() >= lo.array() - tol) && (x.array() <= hi.array() + tol)).all();
}

// ------------------------------------------------------------ ProblemSpec

bool ProblemSpec::has_scalar() const {
  return scenario == Scenario::S1 || scenario == Scenario::S2 || scenario == Scenario::ChannelNewtonian;
}

bool ProblemSpec::has_correction() const {
  return scenario == Scenario::S3 || scenario == Scenario::ChannelCorrected;
}

bool ProblemSpec::has_viscosity_net() const { return scenario == Scenario::ChannelLearnedViscosity; }

std::string ProblemSpec::scalar_name() const { return id == ProblemId::Channel ? "mu1" : "lambda"; }

DerivSpec ProblemSpec::operator_spec() const {
  switch (id) {
    case ProblemId::Ode: return DerivSpec{{true}, {false}};
    case ProblemId::ReactionDiffusion: return DerivSpec{{true, true}, {true, false}};
    case ProblemId::Channel: return DerivSpec{{true}, {true}};
  }
  return DerivSpec::none(1);
}

double ProblemSpec::correction_sign() const { return id == ProblemId::Channel ? 1.0 : -1.0; }

bool ProblemSpec::on_boundary(const Eigen::VectorXd& x, double tol) const {
  if (!domain.contains(x, tol)) return false;
  switch (id) {
    case ProblemId::Ode: return std::abs(x[0] - domain.lo[0]) <= tol;
    case ProblemId::ReactionDiffusion:
      return std::abs(x[1] - domain.lo[1]) <= tol || std::abs(x[0] - domain.lo[0]) <= tol ||
             std::abs(x[0] - domain.hi[0]) <= tol;
    case ProblemId::Channel: return std::abs(std::abs(x[0]) - 0.5 * height) <= tol;
  }
  return false;
}

ProblemSpec make_problem(ProblemId id, Scenario scenario) {
  const bool channel_scenario = scenario == Scenario::ChannelNewtonian || scenario == Scenario::ChannelCorrected ||
                                scenario == Scenario::ChannelLearnedViscosity;
  if (channel_scenario != (id == ProblemId::Channel)) {
    throw ConfigError("scenario " + to_string(scenario) + " does not apply to " + to_string(id));
  }
  ProblemSpec p;
  p.id = id;
  p.scenario = scenario;
  switch (id) {
    case ProblemId::Ode:
      p.domain = Domain{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
      p.lambda_true = 1.5;
      p.s3_base_coeff = 0.2;
      break;
    case ProblemId::ReactionDiffusion:
      p.domain = Domain{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
      p.lambda_true = 2.0;
      p.s3_base_coeff = 1.0;
      break;
    case ProblemId::Channel:
      p.domain = Domain{Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, 0.5)};
      break;
  }
  return p;
}

// --------------------------------------------------------------- operator

namespace {

Var require_scalar(const ProblemSpec& problem, Var scalar, Index rows) {
  if (!scalar.valid()) throw ConfigError("scenario " + to_string(problem.scenario) + " needs " + problem.scalar_name());
  if (scalar.rows() != rows || scalar.cols() != 1) throw ConfigError(problem.scalar_name() + " samples do not match the field");
  return scalar;
}

}  // namespace

OperatorTerms apply_operator(const ProblemSpec& problem, const Jet& u, Var scalar, const Jet* viscosity) {
  const DerivSpec need = problem.operator_spec();
  for (int k = 0; k < need.dim(); ++k) {
    if ((need.first[k] && !u.has_d(k)) || (need.second[k] && !u.has_d2(k))) {
      throw ConfigError("apply_operator: field lacks required derivative channels");
    }
  }
  const Index rows = u.value.rows();
  const Var uv = u.value;
  OperatorTerms t;
  if (problem.id == ProblemId::Ode || problem.id == ProblemId::ReactionDiffusion) {
    const bool ode = problem.id == ProblemId::Ode;
    switch (problem.scenario) {
      case Scenario::S1:
        t.phi_base = gk::cmul(require_scalar(problem, scalar, rows), gk::cmul(uv, gk::shift(gk::neg(uv), 1.0)));
        break;
      case Scenario::S2:
        t.phi_base = gk::cmul(require_scalar(problem, scalar, rows), ode ? gk::cos(uv) : gk::square(uv));
        break;
      case Scenario::S3:
        t.phi_base = gk::scale(ode ? gk::cos(uv) : gk::square(uv), problem.s3_base_coeff);
        break;
      default:
        throw ConfigError("scenario " + to_string(problem.scenario) + " does not apply to " + to_string(problem.id));
    }
    const Var transport =
        ode ? u.d[0] : gk::sub(u.d[1], gk::scale(u.d2[0], problem.diffusion));
    t.residual = gk::sub(transport, t.phi_base);
    return t;
  }
  switch (problem.scenario) {
    case Scenario::ChannelNewtonian:
      t.phi_base = gk::cmul(require_scalar(problem, scalar, rows), u.d2[0]);
      break;
    case Scenario::ChannelCorrected:
      t.phi_base = gk::scale(u.d2[0], problem.mu1);
      break;
    case Scenario::ChannelLearnedViscosity:
      if (viscosity == nullptr || !viscosity->has_d(0)) {
        throw ConfigError("learned-viscosity scenario needs mu(y) with its first derivative");
      }
      t.phi_base = gk::add(gk::cmul(viscosity->d[0], u.d[0]), gk::cmul(viscosity->value, u.d2[0]));
      break;
    default:
      throw ConfigError("scenario " + to_string(problem.scenario) + " does not apply to channel");
  }
  t.residual = gk::shift(t.phi_base, -problem.pressure_c);
  return t;
}

double apply_operator(const ProblemSpec& problem, const gk::JetValue& u, std::optional<double> scalar,
                      const gk::JetValue* viscosity) {
  Tape tape;
  auto c = [&](double v) { return tape.constant(Matrix::Constant(1, 1, v)); };
  const int dim = problem.domain.dim();
  Jet j = Jet::plain(c(u.value), dim);
  for (int k = 0; k < dim; ++k) {
    if (k < static_cast<int>(u.d_input.size())) j.d[k] = c(u.d_input[k]);
    if (k < static_cast<int>(u.d2_input.size())) j.d2[k] = c(u.d2_input[k]);
  }
  std::optional<Jet> visc;
  if (viscosity != nullptr) {
    visc = Jet::plain(c(viscosity->value), dim);
    if (!viscosity->d_input.empty()) visc->d[0] = c(viscosity->d_input[0]);
  }
  const Var s = scalar ? c(*scalar) : Var();
  return apply_operator(problem, j, s, visc ? &*visc : nullptr).residual.scalar();
}

Var forcing_mean(const ProblemSpec& problem, Var residual, Var s) {
  if (!s.valid()) return residual;
  return gk::add(residual, gk::scale(s, problem.correction_sign()));
}

double forcing_mean(const ProblemSpec& problem, double residual, double s) {
  return residual + problem.correction_sign() * s;
}

double boundary_mean(const ProblemSpec& problem, const Eigen::VectorXd& x, double mu_u) {
  if (!problem.on_boundary(x)) throw DomainError("boundary_mean: point is not in the boundary set");
  return mu_u;
}

double gaussian_logpdf(double y, const ConditionalGaussian& g) {
  if (!(g.std > 0.0)) throw ConfigError("gaussian_logpdf: std must be positive");
  const double r = (y - g.mean) / g.std;
  return -0.5 * std::log(2.0 * std::numbers::pi * g.std * g.std) - 0.5 * r * r;
}

Var gaussian_logpdf(Var y, Var mean, Var std) {
  const Var log_std = gk::log(std, 1e-12);
  const Var inv_var = gk::exp(gk::scale(log_std, -2.0));
  const Var quad = gk::scale(gk::cmul(gk::square(gk::sub(y, mean)), inv_var), -0.5);
  return gk::shift(gk::sub(quad, log_std), -0.5 * std::log(2.0 * std::numbers::pi));
}

// ------------------------------------------------------------ ScalarParam

void ScalarParam::add_to(ParamLayout& layout) const {
  layout.add(name + ".mean_raw", 1, 1);
  layout.add(name + ".logstd_raw", 1, 1);
}

void ScalarParam::init(ParamVector& params, double value, double spread) const {
  if (!(spread > 0.0)) throw ConfigError(name + ": initial spread must be positive");
  const double raw = softplus_inverse(value);
  const double slope = 1.0 / (1.0 + std::exp(-raw));
  params.matrix(name + ".mean_raw")(0, 0) = raw;
  params.matrix(name + ".logstd_raw")(0, 0) = std::log(spread / slope);
}

Var ScalarParam::sample(const BoundParams& p, const Matrix& eps) const {
  if (eps.cols() != 1) throw ConfigError(name + ": eps must be a column");
  Tape& tape = p.tape();
  const Var pre = gk::add(gk::tile_rows(p[name + ".mean_raw"], eps.rows()),
                          gk::scale_by(tape.constant(eps), gk::exp(p[name + ".logstd_raw"])));
  return gk::activation(pre, Activation::Softplus);
}

double ScalarParam::sample(const ParamVector& p, double eps) const {
  return softplus(p.matrix(name + ".mean_raw")(0, 0) + eps * std::exp(p.matrix(name + ".logstd_raw")(0, 0)));
}

// ------------------------------------------------------------ LatentModel

Matrix uniform_grid(const Domain& domain, const std::vector<int>& counts) {
  const int dim = domain.dim();
  if (static_cast<int>(counts.size()) != dim) throw ConfigError("grid counts do not match the domain dimension");
  Index total = 1;
  for (int c : counts) {
    if (c < 1) throw ConfigError("grid counts must be positive");
    total *= c;
  }
  Matrix g(total, dim);
  for (Index r = 0; r < total; ++r) {
    Index rem = r;
    for (int k = dim - 1; k >= 0; --k) {
      const Index i = rem % counts[k];
      rem /= counts[k];
      g(r, k) = counts[k] == 1 ? domain.lo[k]
                               : domain.lo[k] + (domain.hi[k] - domain.lo[k]) * static_cast<double>(i) / (counts[k] - 1);
    }
  }
  return g;
}

LatentModel::LatentModel(ProblemSpec problem, ArchConfig arch, bool noise_free, GpPrior prior)
    : problem_(std::move(problem)),
      arch_(std::move(arch)),
      noise_free_(noise_free),
      prior_(std::make_shared<const GpPrior>(std::move(prior))) {
  const int dim = problem_.domain.dim();
  if (prior_->input_dim() != dim) throw ConfigError("prior input dimension does not match the domain");
  if (prior_->latent_dim() != arch_.latent_dim) throw ConfigError("prior latent dimension does not match the model");
  if (arch_.hidden_layers < arch_.integral_layers || arch_.integral_layers < 1) {
    throw ConfigError("decoder needs 1 <= integral_layers <= hidden_layers");
  }
  std::vector<int> q = arch_.quadrature;
  if (q.empty()) q = dim == 1 ? std::vector<int>{128} : std::vector<int>(dim, 16);
  nodes_ = uniform_grid(problem_.domain, q);

  encoder_ = Encoder(dim, arch_.latent_dim, arch_.width, arch_.hidden_layers, arch_.activation);
  decoder_ = IntegralNet{"dec", arch_.latent_dim, arch_.width, arch_.integral_layers,
                         arch_.hidden_layers - arch_.integral_layers, 1, arch_.activation};
  if (problem_.has_correction()) {
    correction_ = arch_.correction_variant == CorrectionVariant::Pointwise
                      ? Correction::pointwise(arch_.latent_dim, arch_.correction_width, arch_.correction_layers,
                                              arch_.correction_activation, arch_.correction_input)
                      : Correction::integral_operator(arch_.latent_dim, arch_.correction_width,
                                                      arch_.correction_layers, arch_.correction_activation);
  }
  if (!noise_free_) variance_ = VarianceHeads(arch_.variance_mode, dim, arch_.variance_width);
  if (problem_.has_scalar()) scalar_ = ScalarParam{problem_.scalar_name()};
  if (problem_.has_viscosity_net()) {
    viscosity_ = DenseNet{"visc", 1, std::vector<int>(arch_.viscosity_layers, arch_.viscosity_width), 1,
                          Activation::Tanh};
  }

  encoder_.add_to(layout_);
  decoder_.add_to(layout_);
  if (correction_) correction_->add_to(layout_);
  if (variance_) variance_->add_to(layout_);
  if (scalar_) scalar_->add_to(layout_);
  if (viscosity_) viscosity_->add_to(layout_);
  node_features_ = std::make_shared<const PathFeatures>(*prior_, nodes_, DerivSpec::none(dim));
}

ParamVector LatentModel::init(std::uint64_t seed, const std::map<std::string, double>& sigma0) const {
  std::mt19937_64 rng(seed);
  ParamVector p(layout_);
  const double kernel_l = arch_.kernel_lengthscale * problem_.domain.diameter();
  encoder_.init(p, rng);
  decoder_.init(p, rng, kernel_l);
  if (correction_) correction_->init(p, rng, kernel_l);
  if (variance_) variance_->init(p, rng, sigma0);
  if (scalar_) scalar_->init(p, arch_.scalar_init, arch_.scalar_spread_init);
  if (viscosity_) {
    viscosity_->init(p, rng);
    p.matrix(viscosity_->bias_name(viscosity_->layer_count() - 1))(0, 0) = softplus_inverse(problem_.mu1);
  }
  return p;
}

bool LatentModel::is_variance_slice(const std::string& name) const { return variance_ && variance_->owns(name); }

DerivSpec LatentModel::spec_for(bool with_operator) const {
  return with_operator ? problem_.operator_spec() : DerivSpec::none(problem_.domain.dim());
}

EncodedField LatentModel::encode(Tape& tape, const BoundParams& p, const Matrix& coords) const {
  return encoder_.features(Jet::input(tape, coords, DerivSpec::none(problem_.domain.dim())), p);
}

DrawContext LatentModel::begin(Tape& tape, const BoundParams& p, const std::vector<LatentDraw>& draws,
                               const Matrix& eps) const {
  if (draws.empty()) throw ConfigError("at least one latent draw is required");
  DrawContext ctx;
  ctx.tape = &tape;
  ctx.params = &p;
  ctx.draws = &draws;
  ctx.count = static_cast<Index>(draws.size());
  const EncodedField enc = encode(tape, p, nodes_);
  const Jet z0 = as_jet(tape, node_features_->evaluate(draws));
  ctx.z1_nodes = mix_latent(enc, z0, ctx.count).value;
  if (scalar_) {
    if (eps.rows() != ctx.count) throw ConfigError("scalar noise count does not match the draws");
    ctx.scalar = scalar_->sample(p, eps);
  }
  const DerivSpec none = DerivSpec::none(problem_.domain.dim());
  for (int i = 0; i + 1 < decoder_.integral_layers; ++i) {
    ctx.decoder_node_weights.push_back(quadrature_weights(tape, nodes_, none, nodes_, decoder_.alpha(p, i)).value);
  }
  if (correction_ && correction_->variant == CorrectionVariant::Integral) {
    const IntegralNet& net = correction_->integral;
    for (int i = 0; i + 1 < net.integral_layers; ++i) {
      ctx.correction_node_weights.push_back(quadrature_weights(tape, nodes_, none, nodes_, net.alpha(p, i)).value);
    }
  }
  return ctx;
}

Evaluation LatentModel::evaluate(const DrawContext& ctx, const Matrix& coords, const PathFeatures& features,
                                 bool with_operator) const {
  Tape& tape = *ctx.tape;
  const BoundParams& p = *ctx.params;
  const Index j = ctx.count;
  const Index rows = coords.rows();
  if (features.point_count() != rows) throw ConfigError("path features were built for a different point set");
  const DerivSpec spec = spec_for(with_operator);
  const Jet x = Jet::input(tape, coords, spec);
  const EncodedField enc = encoder_.features(x, p);
  const Jet z1 = mix_latent(enc, as_jet(tape, features.evaluate(*ctx.draws)), j);

  std::vector<Jet> weights;
  for (int i = 0; i < decoder_.integral_layers; ++i) {
    weights.push_back(quadrature_weights(tape, coords, spec, nodes_, decoder_.alpha(p, i)));
  }
  Evaluation ev;
  ev.u = decoder_.forward(z1, weights, ctx.z1_nodes, ctx.decoder_node_weights, j, p);
  if (!with_operator) return ev;

  if (correction_) {
    if (correction_->variant == CorrectionVariant::Pointwise) {
      ev.s = correction_->pointwise_forward(
          correction_->input == CorrectionInput::Latent ? z1.value : ev.u.value, p);
    } else {
      const IntegralNet& net = correction_->integral;
      const DerivSpec none = DerivSpec::none(problem_.domain.dim());
      std::vector<Jet> cw;
      for (int i = 0; i < net.integral_layers; ++i) {
        cw.push_back(quadrature_weights(tape, coords, none, nodes_, net.alpha(p, i)));
      }
      ev.s = net.forward(z1.values_only(), cw, ctx.z1_nodes, ctx.correction_node_weights, j, p).value;
    }
  }
  const Var scalar_rows = ctx.scalar.valid() ? gk::repeat_rows(ctx.scalar, rows) : Var();
  std::optional<Jet> visc;
  if (viscosity_) {
    const Jet y = Jet::input(tape, coords, DerivSpec{{true}, {false}});
    visc = gk::tile_rows(gk::activation(viscosity_->forward(y, p), Activation::Softplus), j);
  }
  const OperatorTerms terms = apply_operator(problem_, ev.u, scalar_rows, visc ? &*visc : nullptr);
  ev.residual = terms.residual;
  ev.phi = ev.s.valid() ? gk::add(terms.phi_base, ev.s) : terms.phi_base;
  ev.f = forcing_mean(problem_, terms.residual, ev.s);
  return ev;
}

}  // namespace latcorr
