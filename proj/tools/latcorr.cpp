#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "latcorr/errors.hpp"

using namespace latcorr;
using namespace latcorr::cli;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  bool resume = false;
  std::optional<int> n_samples;
  std::optional<double> u0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "replaces the seed this command uses");
  cmd->add_option("--out", o.out, "experiment directory (default: config output)");
}

int run(const std::string& name, const Options& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) {
    if (name == "generate") c.scenario.seed = *o.seed;
    if (name == "train") c.train.seed = *o.seed;
    if (name == "predict") c.inference.seed = *o.seed;
  }
  const RunPaths out{o.out.empty() ? c.output_dir() : fs::path(o.out)};
  if (name == "generate") {
    cmd_generate(c, out);
    std::cout << "wrote " << out.dataset().string() << "\n";
  } else if (name == "train") {
    const RunPaths data{o.data.empty() ? out.root : fs::path(o.data)};
    cmd_train(c, data, out, o.resume, std::cerr);
    std::cout << "wrote " << out.checkpoint().string() << "\n";
  } else if (name == "predict") {
    cmd_predict(c, out);
    std::cout << "wrote " << (out.root / "summary").string() << "\n";
  } else if (name == "reconstruct") {
    cmd_reconstruct(c, out, o.n_samples, o.u0);
    std::cout << "wrote " << out.reconstruction().string() << "\n";
  } else if (name == "evaluate") {
    std::cout << cmd_evaluate(c, out).dump(2) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-representation model correction with uncertainty quantification"};
  app.require_subcommand(1);
  Options o;
  const char* names[] = {"generate", "train", "predict", "evaluate", "reconstruct"};
  const char* help[] = {"generate the dataset", "train a model on the dataset", "Monte Carlo predictive summaries",
                        "metrics against the reference", "integrate sampled f and phi (ODE only)"};
  for (int i = 0; i < 5; ++i) {
    CLI::App* cmd = app.add_subcommand(names[i], help[i]);
    add_common(cmd, o);
    if (std::string(names[i]) == "train") {
      cmd->add_option("--data", o.data, "directory holding dataset.csv (default: --out)");
      cmd->add_flag("--resume", o.resume, "continue from the checkpoint in --out");
    }
    if (std::string(names[i]) == "reconstruct") {
      cmd->add_option("--samples", o.n_samples, "number of draws (default: inference.reconstruct_samples)");
      cmd->add_option("--u0", o.u0, "initial value (default: the problem's)");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigInvalid;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run(name, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const NumericError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const FormatError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kBadFile;
  } catch (const UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return kUnsupported;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
