#include "latcorr/config.hpp"

#include <fstream>
#include <set>

#include "latcorr/errors.hpp"

namespace latcorr {

using nlohmann::json;

namespace {

// Reads the keys of one object and rejects whatever is left unread.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class E, class Parse>
  void get_enum(const char* key, E& out, Parse parse) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, s);
    out = parse(s);
  }

  [[nodiscard]] const json* object(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_data(const json& j, ScenarioConfig& s) {
  Fields f(j, "data");
  f.get_enum("problem", s.problem, parse_problem_id);
  f.get_enum("scenario", s.scenario, parse_scenario);
  f.get("n_u", s.n_u);
  f.get("n_f", s.n_f);
  f.get("u_lattice", s.u_lattice);
  f.get("f_lattice", s.f_lattice);
  f.get("n_b", s.n_b);
  f.get("noise_u", s.noise_u);
  f.get("noise_f", s.noise_f);
  f.get("noise_b", s.noise_b);
  f.get("seed", s.seed);
  f.finish();
}

void read_model(const json& j, ArchConfig& a, std::uint64_t& prior_seed) {
  Fields f(j, "model");
  auto act = [](const std::string& s) { return gradkit::parse_activation(s); };
  f.get("latent_dim", a.latent_dim);
  f.get("width", a.width);
  f.get("hidden_layers", a.hidden_layers);
  f.get("integral_layers", a.integral_layers);
  f.get_enum("activation", a.activation, act);
  f.get("quadrature", a.quadrature);
  f.get("prior_features", a.prior_features);
  f.get("prior_lengthscale", a.prior_lengthscale);
  f.get("prior_seed", prior_seed);
  f.get("kernel_lengthscale", a.kernel_lengthscale);
  f.get_enum("correction_variant", a.correction_variant, parse_correction_variant);
  f.get_enum("correction_input", a.correction_input, parse_correction_input);
  f.get("correction_width", a.correction_width);
  f.get("correction_layers", a.correction_layers);
  f.get_enum("correction_activation", a.correction_activation, act);
  f.get_enum("variance_mode", a.variance_mode, parse_variance_mode);
  f.get("variance_width", a.variance_width);
  f.get("viscosity_width", a.viscosity_width);
  f.get("viscosity_layers", a.viscosity_layers);
  f.get("scalar_init", a.scalar_init);
  f.get("scalar_spread_init", a.scalar_spread_init);
  f.finish();
}

void read_train(const json& j, TrainConfig& t) {
  Fields f(j, "train");
  f.get("weight_u", t.weight_u);
  f.get("weight_f", t.weight_f);
  f.get("weight_b", t.weight_b);
  f.get("beta", t.beta);
  f.get("learning_rate", t.learning_rate);
  f.get("decay_factor", t.decay_factor);
  f.get("decay_period", t.decay_period);
  f.get("iterations", t.iterations);
  f.get("phase1_iterations", t.phase1_iterations);
  f.get("latent_draws", t.latent_draws);
  f.get("reg_points", t.reg_points);
  f.get("seed", t.seed);
  f.get("noise_free", t.noise_free);
  f.get("trace_every", t.trace_every);
  f.get("checkpoint_every", t.checkpoint_every);
  f.finish();
}

void read_inference(const json& j, InferenceConfig& c) {
  Fields f(j, "inference");
  f.get("grid", c.grid);
  f.get("samples", c.samples);
  f.get("reconstruct_samples", c.reconstruct_samples);
  f.get("reconstruct_step", c.reconstruct_step);
  f.get("seed", c.seed);
  f.get("rows_per_batch", c.rows_per_batch);
  f.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("config: name is required");
  const ProblemSpec p = build_scenario(scenario);
  for (double n : {scenario.noise_u, scenario.noise_f, scenario.noise_b}) {
    if (n < 0.0) throw ConfigError("data: noise levels must be nonnegative");
  }
  if (scenario.n_u < 1 || scenario.n_f < 1) throw ConfigError("data: n_u and n_f must be positive");
  const ArchConfig& a = arch;
  for (int v : {a.latent_dim, a.width, a.hidden_layers, a.integral_layers, a.prior_features, a.correction_width,
                a.correction_layers, a.variance_width, a.viscosity_width, a.viscosity_layers}) {
    if (v < 1) throw ConfigError("model: sizes and layer counts must be positive");
  }
  if (a.prior_lengthscale < 0.0) throw ConfigError("model: prior_lengthscale must be nonnegative");
  if (!(a.kernel_lengthscale > 0.0)) throw ConfigError("model: kernel_lengthscale must be positive");
  if (!a.quadrature.empty() && static_cast<int>(a.quadrature.size()) != p.domain.dim()) {
    throw ConfigError("model: quadrature needs one count per coordinate");
  }
  if (!(a.scalar_init > 0.0) || !(a.scalar_spread_init > 0.0)) {
    throw ConfigError("model: scalar_init and scalar_spread_init must be positive");
  }
  train.validate();
  const bool noisy_data = scenario.noise_u > 0.0 || scenario.noise_f > 0.0 || scenario.noise_b > 0.0;
  if (noisy_data && train.noise_free) throw ConfigError("train: noisy data needs the likelihood mode (noise_free false)");
  if (inference.samples < 1 || inference.reconstruct_samples < 1) throw ConfigError("inference: sample counts must be positive");
  if (!(inference.reconstruct_step > 0.0)) throw ConfigError("inference: reconstruct_step must be positive");
  if (inference.rows_per_batch < 1) throw ConfigError("inference: rows_per_batch must be positive");
  if (!inference.grid.empty()) {
    if (static_cast<int>(inference.grid.size()) != p.domain.dim()) {
      throw ConfigError("inference: grid needs one count per coordinate");
    }
    for (int n : inference.grid) {
      if (n < 2) throw ConfigError("inference: grid counts must be at least 2");
    }
  }
}

std::vector<int> ExperimentConfig::grid_counts() const {
  if (!inference.grid.empty()) return inference.grid;
  return scenario.problem == ProblemId::ReactionDiffusion ? std::vector<int>{101, 101} : std::vector<int>{201};
}

std::filesystem::path ExperimentConfig::output_dir() const {
  return output.empty() ? std::filesystem::path("runs") / name : std::filesystem::path(output);
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Fields f(j, "config");
  f.get("name", c.name);
  f.get("output", c.output);
  if (const json* d = f.object("data")) read_data(*d, c.scenario);
  if (const json* m = f.object("model")) read_model(*m, c.arch, c.prior_seed);
  if (const json* t = f.object("train")) read_train(*t, c.train);
  if (const json* i = f.object("inference")) read_inference(*i, c.inference);
  f.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const ArchConfig& a = c.arch;
  const TrainConfig& t = c.train;
  const ScenarioConfig& s = c.scenario;
  json j;
  j["name"] = c.name;
  j["output"] = c.output;
  j["data"] = {{"problem", to_string(s.problem)}, {"scenario", to_string(s.scenario)},
               {"n_u", s.n_u}, {"n_f", s.n_f}, {"u_lattice", s.u_lattice}, {"f_lattice", s.f_lattice},
               {"n_b", s.n_b}, {"noise_u", s.noise_u}, {"noise_f", s.noise_f}, {"noise_b", s.noise_b},
               {"seed", s.seed}};
  j["model"] = {{"latent_dim", a.latent_dim}, {"width", a.width}, {"hidden_layers", a.hidden_layers},
                {"integral_layers", a.integral_layers}, {"activation", to_string(a.activation)},
                {"quadrature", a.quadrature}, {"prior_features", a.prior_features},
                {"prior_lengthscale", a.prior_lengthscale}, {"prior_seed", c.prior_seed},
                {"kernel_lengthscale", a.kernel_lengthscale},
                {"correction_variant", to_string(a.correction_variant)},
                {"correction_input", to_string(a.correction_input)}, {"correction_width", a.correction_width},
                {"correction_layers", a.correction_layers},
                {"correction_activation", to_string(a.correction_activation)},
                {"variance_mode", to_string(a.variance_mode)}, {"variance_width", a.variance_width},
                {"viscosity_width", a.viscosity_width}, {"viscosity_layers", a.viscosity_layers},
                {"scalar_init", a.scalar_init}, {"scalar_spread_init", a.scalar_spread_init}};
  j["train"] = {{"weight_u", t.weight_u}, {"weight_f", t.weight_f}, {"weight_b", t.weight_b}, {"beta", t.beta},
                {"learning_rate", t.learning_rate}, {"decay_factor", t.decay_factor},
                {"decay_period", t.decay_period}, {"iterations", t.iterations},
                {"phase1_iterations", t.phase1_iterations}, {"latent_draws", t.latent_draws},
                {"reg_points", t.reg_points}, {"seed", t.seed}, {"noise_free", t.noise_free},
                {"trace_every", t.trace_every}, {"checkpoint_every", t.checkpoint_every}};
  const InferenceConfig& i = c.inference;
  j["inference"] = {{"grid", i.grid}, {"samples", i.samples}, {"reconstruct_samples", i.reconstruct_samples},
                    {"reconstruct_step", i.reconstruct_step}, {"seed", i.seed},
                    {"rows_per_batch", i.rows_per_batch}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

ProblemSpec problem_for(const ExperimentConfig& c) { return build_scenario(c.scenario); }

GpPrior prior_for(const ExperimentConfig& c) {
  const ProblemSpec p = problem_for(c);
  const double ell = c.arch.prior_lengthscale > 0.0 ? c.arch.prior_lengthscale : 0.1 * p.domain.diameter();
  return GpPrior(c.arch.latent_dim, c.arch.prior_features, ell, p.domain.dim(), c.prior_seed);
}

LatentModel build_model(const ExperimentConfig& c) { return build_model(c, prior_for(c)); }

LatentModel build_model(const ExperimentConfig& c, GpPrior prior) {
  return LatentModel(problem_for(c), c.arch, c.train.noise_free, std::move(prior));
}

Matrix evaluation_grid(const ExperimentConfig& c) { return uniform_grid(problem_for(c).domain, c.grid_counts()); }

}  // namespace latcorr
