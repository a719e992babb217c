#include "latcorr/training.hpp"

#include <cmath>

#include "latcorr/errors.hpp"
#include "latcorr/gradkit/ops.hpp"

namespace latcorr {

namespace gk = gradkit;

namespace {

std::mt19937_64 iteration_rng(std::uint64_t seed, std::int64_t iteration, std::uint32_t tag) {
  const auto it = static_cast<std::uint64_t>(iteration);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(it), static_cast<std::uint32_t>(it >> 32), tag};
  return std::mt19937_64(seq);
}

Var channel_likelihood(Tape& tape, const Eigen::VectorXd& y, Var mean, Var sigma, Index draws) {
  const Var target = tape.constant(y.replicate(draws, 1));
  if (!sigma.valid()) return gk::scale(gk::mean(gk::square(gk::sub(target, mean))), -0.5);
  return gk::mean(gaussian_logpdf(target, mean, gk::tile_rows(sigma, draws)));
}

}  // namespace

void TrainConfig::validate() const {
  if (weight_u < 0.0 || weight_f < 0.0 || weight_b < 0.0) throw ConfigError("likelihood weights must be nonnegative");
  if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(decay_factor > 0.0) || decay_period < 1) throw ConfigError("invalid learning-rate decay");
  if (iterations < 0 || phase1_iterations < 0) throw ConfigError("iteration counts must be nonnegative");
  if (phase1_iterations > iterations) throw ConfigError("phase-1 iterations exceed the total");
  if (latent_draws < 1) throw ConfigError("at least one latent draw per step is required");
  if (reg_points < 1) throw ConfigError("at least one regularizer point is required");
  if (trace_every < 1 || checkpoint_every < 1) throw ConfigError("trace and checkpoint periods must be positive");
}

// ------------------------------------------------------------------- data

TrainingData::TrainingData(const LatentModel& model, const DataSet& data) : data_(data) {
  const int dim = model.problem().domain.dim();
  for (char q : {'u', 'f', 'b'}) {
    const Observations& o = channel(q);
    if (o.size() > 0 && o.x.cols() != dim) throw ConfigError("observation dimension does not match the problem");
    if (o.y.size() != o.size()) throw ConfigError("observation values do not match locations");
    if (o.size() == 0) continue;
    features_[q] = std::make_shared<PathFeatures>(model.prior(), o.x, model.spec_for(q == 'f'));
  }
}

const Observations& TrainingData::channel(char q) const {
  switch (q) {
    case 'u': return data_.u;
    case 'f': return data_.f;
    case 'b': return data_.b;
    default: throw ConfigError(std::string("unknown data channel ") + q);
  }
}

const PathFeatures& TrainingData::features(char q) const {
  const auto it = features_.find(q);
  if (it == features_.end()) throw ConfigError(std::string("no observations in channel ") + q);
  return *it->second;
}

DataTerms data_loss(const LatentModel& model, const BoundParams& p, const TrainingData& data,
                    const TrainConfig& config, const std::vector<LatentDraw>& draws, const Matrix& eps) {
  if (static_cast<int>(draws.size()) != config.latent_draws) throw ConfigError("draw count differs from N_omega");
  Tape& tape = p.tape();
  const DrawContext ctx = model.begin(tape, p, draws, eps);
  const Index j = ctx.count;
  DataTerms t;
  auto term = [&](char q, double weight) -> Var {
    const Observations& o = data.channel(q);
    if (o.size() == 0) {
      if (weight > 0.0) t.warnings.push_back(std::string("channel ") + q + " is empty; its term is zero");
      return tape.constant(Matrix::Zero(1, 1));
    }
    const Evaluation ev = model.evaluate(ctx, o.x, data.features(q), q == 'f');
    const Var mean = q == 'f' ? ev.f : ev.u.value;
    const Var sigma = model.noise_free() ? Var() : model.variance()->sigma(std::string(1, q), tape, o.x, p);
    return channel_likelihood(tape, o.y, mean, sigma, j);
  };
  t.u = term('u', config.weight_u);
  t.f = term('f', config.weight_f);
  t.b = term('b', config.weight_b);
  t.total = gk::add(gk::add(gk::scale(t.u, config.weight_u), gk::scale(t.f, config.weight_f)),
                    gk::scale(t.b, config.weight_b));
  return t;
}

// --------------------------------------------------------------------- KL

double kl_closed_form(double m, double zbar) {
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("confidence must lie in [0, 1)");
  const double a = 1.0 - m;
  return 0.5 * (a * a + m * m * zbar * zbar - 1.0) - std::log(a);
}

Var kl_reg(const LatentModel& model, const BoundParams& p, const Matrix& points) {
  const EncodedField enc = model.encode(p.tape(), p, points);
  const Var m = enc.m.value;
  const Var a = gk::shift(gk::neg(m), 1.0);
  const Var quad = gk::add(gk::square(a), gk::cmul(gk::square(m), gk::square(enc.zbar.value)));
  return gk::mean(gk::sub(gk::scale(gk::shift(quad, -1.0), 0.5), gk::log(a)));
}

McEstimate kl_reg_sampled(const LatentModel& model, const ParamVector& params, const Matrix& points, int samples,
                          std::mt19937_64& rng) {
  if (samples < 2) throw ConfigError("the sampled KL estimator needs at least two samples");
  Tape tape;
  const BoundParams p(tape, params);
  const EncodedField enc = model.encode(tape, p, points);
  const Matrix& m = enc.m.value.value();
  const Matrix& zbar = enc.zbar.value.value();
  if (m.minCoeff() < 0.0 || m.maxCoeff() >= 1.0) throw ConfigError("confidence outside [0, 1)");
  const Eigen::ArrayXXd a = 1.0 - m.array();
  const Eigen::ArrayXXd centre = m.array() * zbar.array();
  const double log_a = a.log().mean();
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  Eigen::ArrayXXd e(m.rows(), m.cols());
  for (int s = 0; s < samples; ++s) {
    for (Index c = 0; c < e.cols(); ++c) {
      for (Index r = 0; r < e.rows(); ++r) e(r, c) = normal(rng);
    }
    const Eigen::ArrayXXd z = centre + a * e;
    // log q(z) - log N(z; 0, 1), the 2 pi terms cancelling
    const double v = -log_a + (0.5 * z.square() - 0.5 * e.square()).mean();
    sum += v;
    sum2 += v * v;
  }
  const double n = samples;
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

ObjectiveTerms total_objective(const LatentModel& model, const BoundParams& p, const TrainingData& data,
                               const TrainConfig& config, const std::vector<LatentDraw>& draws, const Matrix& eps,
                               const Matrix& reg_points) {
  ObjectiveTerms o;
  o.data = data_loss(model, p, data, config, draws, eps);
  o.kl = kl_reg(model, p, reg_points);
  o.objective = gk::sub(o.data.total, gk::scale(o.kl, config.beta));
  return o;
}

IterationSample sample_iteration(const LatentModel& model, const TrainConfig& config, std::int64_t iteration) {
  IterationSample s;
  auto rng = iteration_rng(config.seed, iteration, 0x5eed);
  for (int j = 0; j < config.latent_draws; ++j) s.draws.push_back(sample_draw(model.prior(), rng));
  std::normal_distribution<double> normal(0.0, 1.0);
  s.eps.resize(config.latent_draws, 1);
  for (int j = 0; j < config.latent_draws; ++j) s.eps(j, 0) = normal(rng);
  const Domain& dom = model.problem().domain;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.reg_points.resize(config.reg_points, dom.dim());
  for (int i = 0; i < config.reg_points; ++i) {
    for (int k = 0; k < dom.dim(); ++k) s.reg_points(i, k) = dom.lo[k] + (dom.hi[k] - dom.lo[k]) * unit(rng);
  }
  return s;
}

// ------------------------------------------------------------------- Adam

double scheduled_rate(const TrainConfig& config, std::int64_t step) {
  return config.learning_rate * std::pow(config.decay_factor, static_cast<double>(step / config.decay_period));
}

void adam_step(AdamState& state, ParamVector& params, const gk::Vector& gradient, double rate) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const Index n = params.size();
  if (gradient.size() != n) throw ConfigError("gradient size does not match the parameters");
  if (!gradient.allFinite()) {
    for (const auto& s : params.layout().slices()) {
      if (!gradient.segment(s.offset, s.size()).allFinite()) {
        throw NumericError("non-finite gradient in slice " + s.name);
      }
    }
  }
  if (state.m.size() != n) {
    state.m = gk::Vector::Zero(n);
    state.v = gk::Vector::Zero(n);
  }
  ++state.step;
  state.m = b1 * state.m + (1.0 - b1) * gradient;
  state.v = b2 * state.v + (1.0 - b2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  params.values().array() -= rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

// ------------------------------------------------------------------ train

std::map<std::string, double> initial_sigma(const DataSet& data) {
  double floor = 0.0;
  for (double s : {data.noise_u, data.noise_f, data.noise_b}) {
    if (s > 0.0 && (floor == 0.0 || s < floor)) floor = s;
  }
  if (floor == 0.0) floor = 0.01;
  auto pick = [&](double s) { return s > 0.0 ? s : floor; };
  return {{"u", pick(data.noise_u)}, {"f", pick(data.noise_f)}, {"b", pick(data.noise_b)}};
}

TrainState initial_state(const LatentModel& model, const DataSet& data, const TrainConfig& config) {
  TrainState s;
  s.params = model.init(config.seed, initial_sigma(data));
  s.adam.m = gk::Vector::Zero(s.params.size());
  s.adam.v = gk::Vector::Zero(s.params.size());
  return s;
}

IterationResult evaluate_iteration(const LatentModel& model, const TrainingData& data, const TrainConfig& config,
                                   const ParamVector& params, std::int64_t iteration) {
  const bool phase1 = iteration < config.phase1_iterations;
  const IterationSample sample = sample_iteration(model, config, iteration);
  Tape tape;
  std::function<bool(const std::string&)> frozen;
  if (phase1) frozen = [&model](const std::string& name) { return model.is_variance_slice(name); };
  const BoundParams p(tape, params, frozen);
  const ObjectiveTerms o = total_objective(model, p, data, config, sample.draws, sample.eps, sample.reg_points);
  const Var loss = gk::neg(o.objective);
  tape.backward(loss);
  IterationResult r;
  r.row = {iteration, phase1 ? 1 : 2, loss.scalar(), o.data.u.scalar(), o.data.f.scalar(), o.data.b.scalar(),
           o.kl.scalar()};
  r.gradient = p.gradient();
  return r;
}

TrainState train(const LatentModel& model, const DataSet& data, const TrainConfig& config, TrainState state,
                 const TrainHooks& hooks) {
  config.validate();
  if (model.noise_free() != config.noise_free) throw ConfigError("model and training noise modes differ");
  if (data.problem != model.problem().id) throw ConfigError("dataset belongs to a different problem");
  if (state.params.layout().size() != model.layout().size()) throw ConfigError("parameters do not match the model");
  const TrainingData td(model, data);
  if (hooks.on_warning) {
    const std::pair<char, double> channels[] = {{'u', config.weight_u}, {'f', config.weight_f}, {'b', config.weight_b}};
    for (const auto& [q, w] : channels) {
      if (w > 0.0 && td.channel(q).size() == 0) hooks.on_warning(std::string("channel ") + q + " is empty; its term is zero");
    }
  }
  bool saved = false;
  for (std::int64_t it = state.iteration; it < config.iterations; ++it) {
    IterationResult r = evaluate_iteration(model, td, config, state.params, it);
    auto diverge = [&](const std::string& what) {
      if (hooks.on_checkpoint) hooks.on_checkpoint(state);
      throw NumericError("training diverged at iteration " + std::to_string(it) + ": " + what);
    };
    if (!std::isfinite(r.row.total)) diverge("non-finite loss");
    if (it % config.trace_every == 0) {
      state.trace.push_back(r.row);
      if (hooks.on_trace) hooks.on_trace(r.row);
    }
    try {
      ParamVector next = state.params;
      AdamState adam = state.adam;
      adam_step(adam, next, r.gradient, scheduled_rate(config, it));
      next.require_finite();
      state.params = std::move(next);
      state.adam = std::move(adam);
    } catch (const NumericError& e) {
      diverge(e.what());
    }
    state.iteration = it + 1;
    saved = false;
    if (state.iteration % config.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(state);
      saved = true;
    }
  }
  if (!saved && hooks.on_checkpoint) hooks.on_checkpoint(state);
  return state;
}

}  // namespace latcorr
