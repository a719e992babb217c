#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "latcorr/gp_prior.hpp"
#include "latcorr/gradkit/dense.hpp"

namespace latcorr {

using gradkit::Activation;
using gradkit::BoundParams;
using gradkit::DenseNet;
using gradkit::DerivSpec;
using gradkit::Jet;
using gradkit::ParamLayout;
using gradkit::ParamVector;
using gradkit::Tape;
using gradkit::Var;

inline constexpr double kConfidenceFloor = 1e-4;

/// Deterministic encoder features at a point set (one row per point).
struct EncodedField {
  Jet zbar;  ///< P x M
  Jet m;     ///< P x M confidence in (0, 1)
};

/// Confidence-aware encoder: z1 = m * zbar + (1 - m) * z0.
struct Encoder {
  DenseNet zbar;
  DenseNet confidence;
  /// Clamp m to [kConfidenceFloor, 1 - kConfidenceFloor]; disabled only in tests.
  bool clamp = true;

  Encoder() = default;
  Encoder(int input_dim, int latent_dim, int width, int hidden_layers, Activation act);

  [[nodiscard]] int latent_dim() const { return zbar.out_dim; }
  void add_to(ParamLayout& layout) const;
  void init(ParamVector& params, std::mt19937_64& rng) const;
  [[nodiscard]] EncodedField features(const Jet& x, const BoundParams& p) const;
};

/// Mixes encoder features with prior paths for a batch of draws. `z0` holds
/// draws stacked draw-major (rows = draws * P); the result has the same shape.
Jet mix_latent(const EncodedField& enc, const Jet& z0, gradkit::Index draws);

/// Normalized Gaussian quadrature weights w(x, x_q) with their exact
/// derivatives in the query point. Rows = query points, cols = nodes.
Jet quadrature_weights(Tape& tape, const gradkit::Matrix& query, const DerivSpec& spec,
                       const gradkit::Matrix& nodes, Var alpha);

/// Sum_q w(x, x_q) * node_field(x_q) for every draw. `node_field` stacks the
/// draws draw-major (draws * Nq rows); the result stacks draws * P rows.
Jet integral_term(const Jet& weights, Var node_field, gradkit::Index draws);

/// Integral neural operator: `integral_layers` kernel layers
///   z_i = act(W_i z_{i-1} + b_i + sum_q w_i(x, x_q) V_i z_{i-1}(x_q))
/// followed by a dense MLP and an affine scalar output.
struct IntegralNet {
  std::string prefix;
  int in_dim = 1;
  int width = 64;
  int integral_layers = 1;
  int dense_layers = 2;
  int out_dim = 1;
  Activation act = Activation::Mish;

  [[nodiscard]] std::string alpha_name(int layer) const;
  [[nodiscard]] DenseNet head() const;
  void add_to(ParamLayout& layout) const;
  /// Glorot weights; kernel length scale `lengthscale` (alpha = 1 / (2 l^2)).
  void init(ParamVector& params, std::mt19937_64& rng, double lengthscale) const;
  /// alpha_i = softplus(raw_i) as a 1x1 node.
  [[nodiscard]] Var alpha(const BoundParams& p, int layer) const;

  /// `query_weights[i]` are the layer-i weights at the query points and
  /// `node_weights[i]` the node-to-node weights (needed for i >= 1 only).
  [[nodiscard]] Jet forward(const Jet& query_field, const std::vector<Jet>& query_weights,
                            Var node_field, const std::vector<Var>& node_weights,
                            gradkit::Index draws, const BoundParams& p) const;
};

enum class CorrectionVariant { Pointwise, Integral };
enum class CorrectionInput { Latent, SolutionMean };

CorrectionVariant parse_correction_variant(const std::string& s);
std::string to_string(CorrectionVariant v);
CorrectionInput parse_correction_input(const std::string& s);
std::string to_string(CorrectionInput v);

/// Correction decoder s(x, omega).
struct Correction {
  CorrectionVariant variant = CorrectionVariant::Pointwise;
  CorrectionInput input = CorrectionInput::Latent;
  DenseNet mlp;        ///< pointwise variant
  IntegralNet integral;  ///< integral variant

  [[nodiscard]] static Correction pointwise(int latent_dim, int width, int layers, Activation act,
                                            CorrectionInput input = CorrectionInput::Latent);
  [[nodiscard]] static Correction integral_operator(int latent_dim, int width, int layers, Activation act);

  void add_to(ParamLayout& layout) const;
  void init(ParamVector& params, std::mt19937_64& rng, double lengthscale) const;
  /// Pointwise evaluation on a (draws * P) x in_dim field of values.
  [[nodiscard]] Var pointwise_forward(Var field, const BoundParams& p) const;
  /// Sets the output layer to zero so that s vanishes identically.
  void zero_output(ParamVector& params) const;
};

enum class VarianceMode { Constant, Mlp };
VarianceMode parse_variance_mode(const std::string& s);
std::string to_string(VarianceMode m);

/// Positive noise scale sigma(x) = softplus(raw) or softplus(MLP(x)).
struct VarianceHead {
  std::string prefix;
  VarianceMode mode = VarianceMode::Constant;
  DenseNet mlp;

  VarianceHead() = default;
  VarianceHead(std::string prefix, VarianceMode mode, int input_dim, int width);

  void add_to(ParamLayout& layout) const;
  /// Initializes so that sigma(x) = sigma0 everywhere.
  void init(ParamVector& params, std::mt19937_64& rng, double sigma0) const;
  /// P x 1 standard deviations at `coords`.
  [[nodiscard]] Var sigma(Tape& tape, const gradkit::Matrix& coords, const BoundParams& p) const;
  /// Whether `slice` belongs to this head.
  [[nodiscard]] bool owns(const std::string& slice) const;
};

/// Heads for the u, f and b channels.
class VarianceHeads {
 public:
  VarianceHeads() = default;
  VarianceHeads(VarianceMode mode, int input_dim, int width);

  [[nodiscard]] const VarianceHead& head(const std::string& quantity) const;
  void add_to(ParamLayout& layout) const;
  void init(ParamVector& params, std::mt19937_64& rng, const std::map<std::string, double>& sigma0) const;
  [[nodiscard]] bool owns(const std::string& slice) const;
  /// sigma for `quantity` in {u, f, b}; ConfigError for anything else.
  [[nodiscard]] Var sigma(const std::string& quantity, Tape& tape, const gradkit::Matrix& coords,
                          const BoundParams& p) const;

 private:
  std::map<std::string, VarianceHead> heads_;
};

double softplus(double x);
/// Inverse of softplus for y > 0.
double softplus_inverse(double y);

}  // namespace latcorr
