#include "commands.hpp"

#include <cmath>
#include <ostream>

#include "latcorr/errors.hpp"
#include "latcorr/inference.hpp"
#include "latcorr/io.hpp"

namespace latcorr::cli {

using nlohmann::json;

namespace {

const char* const kQuantities[] = {"u", "f", "phi", "s"};

const Eigen::VectorXd* field(const ReferenceFields& r, const std::string& q) {
  const Eigen::VectorXd* v = q == "u" ? &r.u : q == "f" ? &r.f : q == "phi" ? &r.phi : &r.s;
  return v->size() > 0 && v->allFinite() ? v : nullptr;
}

// The blocks that fix the parameter layout and the data must agree between a
// checkpoint and the config it is used with.
void require_compatible(const ExperimentConfig& c, const Checkpoint& ck) {
  const json a = to_json(c), b = to_json(ck.config);
  for (const char* block : {"data", "model"}) {
    if (a.at(block) != b.at(block)) {
      throw ConfigError(std::string("checkpoint was trained with a different '") + block + "' block");
    }
  }
  if (a.at("train").at("noise_free") != b.at("train").at("noise_free")) {
    throw ConfigError("checkpoint was trained with a different noise mode");
  }
}

void require_same_grid(const Matrix& a, const Matrix& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || (a - b).cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigError(what + ": grid does not match the configured evaluation grid");
  }
}

}  // namespace

void cmd_generate(const ExperimentConfig& c, const RunPaths& out) {
  const DataSet d = generate(c.scenario);
  const ProblemSpec p = problem_for(c);
  write_atomic(out.dataset(), dataset_csv(d, p.domain.dim()));
  write_atomic(out.dataset_meta(), dataset_metadata(d, c.scenario, p).dump(2) + "\n");
}

void cmd_train(const ExperimentConfig& c, const RunPaths& data, const RunPaths& out, bool resume, std::ostream& log) {
  const DataSet d = read_dataset(data.dataset(), data.dataset_meta());
  if (d.problem != c.scenario.problem) throw ConfigError("dataset belongs to a different problem");
  GpPrior prior = prior_for(c);
  TrainState state;
  std::optional<LatentModel> model;
  if (resume) {
    Checkpoint ck = load_checkpoint(out.checkpoint());
    require_compatible(c, ck);
    prior = ck.prior;
    state = std::move(ck.state);
    model.emplace(build_model(c, prior));
    log << "resuming at iteration " << state.iteration << "\n";
  } else {
    model.emplace(build_model(c, prior));
    state = initial_state(*model, d, c.train);
  }
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const TrainState& s) {
    save_checkpoint(out.checkpoint(), Checkpoint{c, prior, s});
    write_atomic(out.trace(), trace_csv(s.trace));
  };
  hooks.on_trace = [&](const TraceRow& r) {
    if (r.iteration % 1000 == 0) {
      log << "iter " << r.iteration << " phase " << r.phase << " loss " << r.total << " kl " << r.kl << "\n";
      log.flush();
    }
  };
  hooks.on_warning = [&](const std::string& w) { log << "warning: " << w << "\n"; };
  (void)train(*model, d, c.train, std::move(state), hooks);
}

void cmd_predict(const ExperimentConfig& c, const RunPaths& out) {
  const Checkpoint ck = load_checkpoint(out.checkpoint());
  require_compatible(c, ck);
  const LatentModel model = build_model(c, ck.prior);
  const Matrix grid = evaluation_grid(c);
  const ProblemSpec p = problem_for(c);
  const ReferenceFields ref = reference_fields(p, grid);

  PredictOptions opt;
  opt.samples = c.inference.samples;
  opt.seed = c.inference.seed;
  opt.rows_per_batch = c.inference.rows_per_batch;
  const PredictiveSummary s = predict(model, ck.state.params, grid, opt);
  for (const auto& [q, summary] : s.quantities) write_atomic(out.summary(q), summary_csv(grid, summary, field(ref, q)));

  json meta;
  meta["samples"] = s.samples;
  meta["seed"] = opt.seed;
  meta["iteration"] = ck.state.iteration;
  if (s.scalar_mean) {
    meta["scalar"] = {{"name", model.scalar()->name}, {"mean", *s.scalar_mean}, {"std", *s.scalar_std}};
  }
  write_atomic(out.predict_meta(), meta.dump(2) + "\n");

  if (p.id == ProblemId::Ode) {
    PredictiveSamples kept;
    PredictOptions many = opt;
    many.samples = c.inference.reconstruct_samples;
    many.keep = &kept;
    (void)predict(model, ck.state.params, grid, many);
    write_atomic(out.samples("f"), samples_csv(grid, kept.f));
    write_atomic(out.samples("phi"), samples_csv(grid, kept.phi));
  }
}

void cmd_reconstruct(const ExperimentConfig& c, const RunPaths& out, std::optional<int> n_samples,
                     std::optional<double> u0) {
  const ProblemSpec p = problem_for(c);
  if (p.id != ProblemId::Ode) throw UnsupportedError("reconstruct applies to the ODE problem only");
  Matrix grid_f, grid_phi;
  const Matrix f = parse_samples_csv(read_file(out.samples("f")), grid_f);
  const Matrix phi = parse_samples_csv(read_file(out.samples("phi")), grid_phi);
  require_same_grid(grid_f, grid_phi, "samples");
  const int n = n_samples.value_or(c.inference.reconstruct_samples);
  const ReconstructionResult r =
      reconstruct_u_tilde(f, phi, grid_f.col(0), u0.value_or(p.u0), n, c.inference.reconstruct_step);
  const ReferenceFields ref = reference_fields(p, grid_f);
  write_atomic(out.reconstruction(), summary_csv(grid_f, QuantitySummary{r.mean, r.std}, &ref.u));
}

json cmd_evaluate(const ExperimentConfig& c, const RunPaths& out) {
  const ProblemSpec p = problem_for(c);
  const Matrix grid = evaluation_grid(c);
  const ReferenceFields ref = reference_fields(p, grid);
  json rel = json::object(), rmse = json::object(), cover = json::object(), spread = json::object();

  auto score = [&](const std::string& key, const SummaryTable& t, const Eigen::VectorXd* reference) {
    require_same_grid(t.grid, grid, key);
    if (reference == nullptr) {
      rel[key] = rmse[key] = cover[key] = nullptr;
    } else {
      const double norm = reference->norm();
      rel[key] = norm > 0.0 ? json(relative_l2(t.mean, *reference)) : json(nullptr);
      rmse[key] = std::sqrt((t.mean - *reference).squaredNorm() / static_cast<double>(reference->size()));
      cover[key] = coverage_2sigma(t.mean, t.std, *reference);
    }
    spread[key] = t.std.mean();
  };

  for (const char* q : kQuantities) {
    if (!fs::exists(out.summary(q))) continue;
    score(q, parse_summary_csv(read_file(out.summary(q))), field(ref, q));
  }
  if (p.id == ProblemId::Ode) {
    if (fs::exists(out.reconstruction())) {
      score("u_tilde", parse_summary_csv(read_file(out.reconstruction())), &ref.u);
    } else {
      rel["u_tilde"] = nullptr;
    }
  }
  json m;
  m["name"] = c.name;
  m["problem"] = to_string(c.scenario.problem);
  m["scenario"] = to_string(c.scenario.scenario);
  m["rel_l2"] = rel;
  m["rmse"] = rmse;
  m["coverage_2sigma"] = cover;
  m["mean_std"] = spread;
  const json meta = json::parse(read_file(out.predict_meta()));
  m["samples"] = meta.at("samples");
  if (meta.contains("scalar")) m["scalar"] = meta.at("scalar");
  write_atomic(out.metrics(), m.dump(2) + "\n");
  return m;
}

}  // namespace latcorr::cli
