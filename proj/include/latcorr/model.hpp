#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latcorr/gradkit/diff.hpp"
#include "latcorr/nets.hpp"

namespace latcorr {

using gradkit::Index;
using gradkit::Matrix;

enum class ProblemId { Ode, ReactionDiffusion, Channel };
enum class Scenario { S1, S2, S3, ChannelNewtonian, ChannelCorrected, ChannelLearnedViscosity };

ProblemId parse_problem_id(const std::string& s);
std::string to_string(ProblemId p);
Scenario parse_scenario(const std::string& s);
std::string to_string(Scenario s);

/// Axis-aligned box [lo, hi].
struct Domain {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }
  [[nodiscard]] double diameter() const { return (hi - lo).norm(); }
  [[nodiscard]] bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;
};

/// Problem definition: domain, operator and scenario wiring. Coordinates are
/// t for the ODE, (x, t) for reaction-diffusion and y for the channel.
struct ProblemSpec {
  ProblemId id = ProblemId::Ode;
  Scenario scenario = Scenario::S1;
  Domain domain;
  double diffusion = 0.01;     ///< reaction-diffusion D
  double lambda_true = 1.5;    ///< generator value of the reaction rate
  double u0 = 0.0;             ///< ODE initial value
  double mu0 = 0.5;            ///< power-law consistency
  double power_n = 0.25;       ///< power-law index
  double pressure_c = -1.0;    ///< channel forcing constant
  double mu1 = 0.1;            ///< fixed Newtonian viscosity of the corrected channel model
  double height = 1.0;         ///< channel height H
  double s3_base_coeff = 0.2;  ///< ODE S3 base reaction 0.2 cos(u); RD S3 uses 1 * u^2

  [[nodiscard]] bool has_scalar() const;
  [[nodiscard]] bool has_correction() const;
  [[nodiscard]] bool has_viscosity_net() const;
  /// Name of the learnable scalar ("lambda" or "mu1").
  [[nodiscard]] std::string scalar_name() const;
  /// Input derivatives the operator consumes.
  [[nodiscard]] DerivSpec operator_spec() const;
  /// +1 when the correction adds to the residual, -1 when it is subtracted.
  [[nodiscard]] double correction_sign() const;
  /// Whether x lies in the boundary/initial set carrying b-data.
  [[nodiscard]] bool on_boundary(const Eigen::VectorXd& x, double tol = 1e-12) const;
};

/// Problem with its standard domain and constants; rejects scenarios that
/// do not belong to the problem.
ProblemSpec make_problem(ProblemId id, Scenario scenario);

/// Residual N[u] and the modelled reaction/constitutive term phi_base, per row.
struct OperatorTerms {
  Var residual;
  Var phi_base;
};

/// Applies the problem operator to a field batch. `scalar` (rows matching u)
/// supplies lambda or mu1 when the scenario learns it; `viscosity` the
/// learned mu(y) jet for the divergence-form channel variant.
OperatorTerms apply_operator(const ProblemSpec& problem, const Jet& u, Var scalar,
                             const Jet* viscosity = nullptr);

/// Pointwise form on a field known with its input derivatives.
double apply_operator(const ProblemSpec& problem, const gradkit::JetValue& u,
                      std::optional<double> scalar = std::nullopt,
                      const gradkit::JetValue* viscosity = nullptr);

/// mu_f = N[mu_u] + sign * s.
Var forcing_mean(const ProblemSpec& problem, Var residual, Var s);
double forcing_mean(const ProblemSpec& problem, double residual, double s);

/// mu_b = mu_u(x); throws DomainError when x is not a boundary point.
double boundary_mean(const ProblemSpec& problem, const Eigen::VectorXd& x, double mu_u);

struct ConditionalGaussian {
  double mean = 0.0;
  double std = 1.0;
};

double gaussian_logpdf(double y, const ConditionalGaussian& g);
/// Elementwise log densities of targets y under N(mean, std^2).
Var gaussian_logpdf(Var y, Var mean, Var std);

/// Learnable nonnegative scalar with Gaussian uncertainty:
/// value = softplus(mean_raw + eps * exp(logstd_raw)), one eps per latent draw.
struct ScalarParam {
  std::string name;

  void add_to(ParamLayout& layout) const;
  void init(ParamVector& params, double value, double spread) const;
  /// Draws x 1 samples for the given standard-normal eps (draws x 1).
  [[nodiscard]] Var sample(const BoundParams& p, const Matrix& eps) const;
  [[nodiscard]] double sample(const ParamVector& p, double eps) const;
};

/// Architecture and initialization settings.
struct ArchConfig {
  int latent_dim = 20;
  int width = 64;
  int hidden_layers = 3;
  int integral_layers = 1;
  Activation activation = Activation::Mish;
  std::vector<int> quadrature;      ///< nodes per coordinate; empty selects 128 (1D) or 16x16 (2D)
  int prior_features = 128;
  double prior_lengthscale = 0.0;   ///< 0 selects 0.1 x domain diameter
  double kernel_lengthscale = 0.2;  ///< initial decoder kernel length, fraction of the diameter
  CorrectionVariant correction_variant = CorrectionVariant::Pointwise;
  CorrectionInput correction_input = CorrectionInput::Latent;
  int correction_width = 64;
  int correction_layers = 2;
  Activation correction_activation = Activation::Tanh;
  VarianceMode variance_mode = VarianceMode::Constant;
  int variance_width = 32;
  int viscosity_width = 32;
  int viscosity_layers = 2;
  double scalar_init = 1.0;
  double scalar_spread_init = 0.01;
};

/// Model outputs at a batch of P points for J draws (rows draw-major).
struct Evaluation {
  Jet u;        ///< mu_u with the channels requested
  Var s;        ///< correction, invalid when the scenario has none
  Var phi;      ///< phi_base + s
  Var f;        ///< mu_f
  Var residual; ///< N[mu_u]
};

/// Per-iteration quantities shared by all point batches: latent values at
/// the quadrature nodes, kernel weights between nodes and scalar samples.
struct DrawContext {
  Tape* tape = nullptr;
  const BoundParams* params = nullptr;
  const std::vector<LatentDraw>* draws = nullptr;
  Index count = 0;
  Var z1_nodes;
  Var scalar;  ///< draws x 1, invalid without a learnable scalar
  std::vector<Var> decoder_node_weights;
  std::vector<Var> correction_node_weights;
};

/// The assembled probabilistic model: encoder, solution decoder, optional
/// correction decoder, variance heads, learnable scalar and viscosity net.
class LatentModel {
 public:
  LatentModel(ProblemSpec problem, ArchConfig arch, bool noise_free, GpPrior prior);

  [[nodiscard]] const ProblemSpec& problem() const { return problem_; }
  [[nodiscard]] const ArchConfig& arch() const { return arch_; }
  [[nodiscard]] bool noise_free() const { return noise_free_; }
  [[nodiscard]] const GpPrior& prior() const { return *prior_; }
  [[nodiscard]] const ParamLayout& layout() const { return layout_; }
  [[nodiscard]] const Matrix& nodes() const { return nodes_; }
  [[nodiscard]] const Encoder& encoder() const { return encoder_; }
  [[nodiscard]] const IntegralNet& decoder() const { return decoder_; }
  [[nodiscard]] const std::optional<Correction>& correction() const { return correction_; }
  [[nodiscard]] const std::optional<VarianceHeads>& variance() const { return variance_; }
  [[nodiscard]] const std::optional<ScalarParam>& scalar() const { return scalar_; }
  [[nodiscard]] const std::optional<DenseNet>& viscosity() const { return viscosity_; }

  /// Fresh parameters; sigma0 holds initial noise scales for u, f, b.
  [[nodiscard]] ParamVector init(std::uint64_t seed, const std::map<std::string, double>& sigma0) const;
  /// Whether a slice belongs to the variance heads (frozen in phase 1).
  [[nodiscard]] bool is_variance_slice(const std::string& name) const;

  /// Node features for the prior; build once per model.
  [[nodiscard]] const PathFeatures& node_features() const { return *node_features_; }

  [[nodiscard]] DrawContext begin(Tape& tape, const BoundParams& p, const std::vector<LatentDraw>& draws,
                                  const Matrix& eps) const;
  /// Evaluates at `coords`; `features` must be built from the same points with
  /// `spec` (operator_spec() when `with_operator`).
  [[nodiscard]] Evaluation evaluate(const DrawContext& ctx, const Matrix& coords, const PathFeatures& features,
                                    bool with_operator) const;
  [[nodiscard]] DerivSpec spec_for(bool with_operator) const;

  /// Encoder features at `coords` (values only).
  [[nodiscard]] EncodedField encode(Tape& tape, const BoundParams& p, const Matrix& coords) const;

 private:
  ProblemSpec problem_;
  ArchConfig arch_;
  bool noise_free_;
  std::shared_ptr<const GpPrior> prior_;
  Matrix nodes_;
  Encoder encoder_;
  IntegralNet decoder_;
  std::optional<Correction> correction_;
  std::optional<VarianceHeads> variance_;
  std::optional<ScalarParam> scalar_;
  std::optional<DenseNet> viscosity_;
  ParamLayout layout_;
  std::shared_ptr<const PathFeatures> node_features_;
};

/// Uniform tensor grid with `counts[k]` points along coordinate k (row-major, last coordinate fastest).
Matrix uniform_grid(const Domain& domain, const std::vector<int>& counts);

}  // namespace latcorr
