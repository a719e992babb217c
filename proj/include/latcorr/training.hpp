#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "latcorr/model.hpp"
#include "latcorr/problems.hpp"

namespace latcorr {

struct TrainConfig {
  double weight_u = 1.0;
  double weight_f = 1.0;
  double weight_b = 1.0;
  double beta = 1e-5;
  double learning_rate = 1e-3;
  double decay_factor = 0.7;
  int decay_period = 1000;
  int iterations = 20000;
  int phase1_iterations = 0;  ///< variance heads frozen for these first iterations
  int latent_draws = 16;
  int reg_points = 256;
  std::uint64_t seed = 1;
  bool noise_free = true;
  int trace_every = 100;
  int checkpoint_every = 1000;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// Observation locations with their prior features, built once per dataset.
class TrainingData {
 public:
  TrainingData(const LatentModel& model, const DataSet& data);

  [[nodiscard]] const DataSet& data() const { return data_; }
  [[nodiscard]] const Observations& channel(char q) const;
  [[nodiscard]] const PathFeatures& features(char q) const;

 private:
  DataSet data_;
  std::map<char, std::shared_ptr<PathFeatures>> features_;
};

/// Per-channel terms of the data log-likelihood (already weighted in `total`).
struct DataTerms {
  Var u, f, b;
  Var total;
  std::vector<std::string> warnings;
};

/// Monte Carlo data log-likelihood for the given draws; `eps` is the draws x 1
/// noise for the learnable scalar. Noise-free models use -0.5 (y - mu)^2.
DataTerms data_loss(const LatentModel& model, const BoundParams& p, const TrainingData& data,
                    const TrainConfig& config, const std::vector<LatentDraw>& draws, const Matrix& eps);

/// Closed-form KL(q_E || prior) per point and latent dimension.
double kl_closed_form(double m, double zbar);
/// Closed-form KL averaged over the points and latent dimensions.
Var kl_reg(const LatentModel& model, const BoundParams& p, const Matrix& points);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
/// Sample estimator: mean of log q_E(z1) - log N(z1; 0, 1) over drawn z1,
/// averaged over the points and latent dimensions.
McEstimate kl_reg_sampled(const LatentModel& model, const ParamVector& params, const Matrix& points, int samples,
                          std::mt19937_64& rng);

struct ObjectiveTerms {
  DataTerms data;
  Var kl;
  Var objective;  ///< data - beta * kl (maximized)
};

ObjectiveTerms total_objective(const LatentModel& model, const BoundParams& p, const TrainingData& data,
                               const TrainConfig& config, const std::vector<LatentDraw>& draws, const Matrix& eps,
                               const Matrix& reg_points);

/// Random quantities for one training iteration.
struct IterationSample {
  std::vector<LatentDraw> draws;
  Matrix eps;
  Matrix reg_points;
};
/// Deterministic in (seed, iteration).
IterationSample sample_iteration(const LatentModel& model, const TrainConfig& config, std::int64_t iteration);

struct AdamState {
  gradkit::Vector m;
  gradkit::Vector v;
  std::int64_t step = 0;
};

/// eta * factor^floor(step / period)
double scheduled_rate(const TrainConfig& config, std::int64_t step);
/// One Adam update of `params` along `gradient` (descent). NumericError on a
/// non-finite gradient, naming the offending slice.
void adam_step(AdamState& state, ParamVector& params, const gradkit::Vector& gradient, double rate);

struct TraceRow {
  std::int64_t iteration = 0;
  int phase = 1;
  double total = 0.0;  ///< negative objective (the minimized loss)
  double data_u = 0.0;
  double data_f = 0.0;
  double data_b = 0.0;
  double kl = 0.0;
};

struct TrainState {
  ParamVector params;
  AdamState adam;
  std::int64_t iteration = 0;
  std::vector<TraceRow> trace;
};

struct TrainHooks {
  /// Called every config.checkpoint_every iterations, at the end, and with the
  /// last finite state before a divergence is reported.
  std::function<void(const TrainState&)> on_checkpoint;
  std::function<void(const TraceRow&)> on_trace;
  std::function<void(const std::string&)> on_warning;
};

/// Initial noise scales: recorded noise levels, the smallest nonzero level
/// standing in for clean channels (0.01 when all are clean).
std::map<std::string, double> initial_sigma(const DataSet& data);

TrainState initial_state(const LatentModel& model, const DataSet& data, const TrainConfig& config);

/// Runs iterations [state.iteration, config.iterations). Phase 1 freezes the
/// variance heads at their initial values.
TrainState train(const LatentModel& model, const DataSet& data, const TrainConfig& config, TrainState state,
                 const TrainHooks& hooks = {});

/// Loss, gradient and trace row of one iteration without updating anything.
struct IterationResult {
  TraceRow row;
  gradkit::Vector gradient;
};
IterationResult evaluate_iteration(const LatentModel& model, const TrainingData& data, const TrainConfig& config,
                                   const ParamVector& params, std::int64_t iteration);

}  // namespace latcorr
