#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "latcorr/errors.hpp"
#include "latcorr/io.hpp"

using namespace latcorr;
using namespace testutil;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json preset(const std::string& name) {
  std::ifstream in(fs::path(LATCORR_PRESET_DIR) / (name + ".json"));
  REQUIRE(in.good());
  return json::parse(in);
}

Checkpoint sample_checkpoint() {
  ExperimentConfig c = parse_config(preset("ode_s3_noisy"));
  c.arch = tiny_arch(1);
  const LatentModel model = build_model(c);
  Checkpoint ck{c, model.prior(), {}};
  ck.state.params = model.init(3, unit_sigma());
  ck.state.iteration = 17;
  ck.state.adam.step = 17;
  ck.state.adam.m = gradkit::Vector::LinSpaced(ck.state.params.size(), -1.0, 1.0);
  ck.state.adam.v = ck.state.adam.m.cwiseAbs2();
  ck.state.trace.push_back({0, 1, 2.5, -0.1, -0.2, -0.3, 0.7});
  ck.state.trace.push_back({10, 2, 1.0 / 3.0, -1e-300, 5e300, -0.0, 0.1});
  return ck;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad values") {
  json j = preset("ode_s1_clean");
  CHECK_NOTHROW((void)parse_config(j));

  json extra = j;
  extra["learning_rate"] = 0.1;
  CHECK_THROWS_WITH_AS((void)parse_config(extra), doctest::Contains("unknown key 'learning_rate'"), ConfigError);
  json nested = j;
  nested["train"]["betta"] = 0.1;
  CHECK_THROWS_WITH_AS((void)parse_config(nested), doctest::Contains("train: unknown key 'betta'"), ConfigError);

  auto rejects = [&](const char* block, const char* key, json value) {
    json b = j;
    b[block][key] = std::move(value);
    INFO(block << "." << key);
    CHECK_THROWS_AS((void)parse_config(b), ConfigError);
  };
  rejects("train", "beta", -1e-3);
  rejects("train", "iterations", "many");
  rejects("train", "phase1_iterations", 30000);
  rejects("data", "scenario", "channel_corrected");
  rejects("data", "problem", "cavity");
  rejects("data", "noise_u", 0.01);  // noisy data in noise-free mode
  rejects("model", "activation", "relu");
  rejects("model", "quadrature", json::array({4, 4}));
  rejects("inference", "grid", json::array({1}));
  CHECK_THROWS_AS((void)parse_config(json::array()), ConfigError);
}

TEST_CASE("config JSON round trip") {
  const ExperimentConfig a = parse_config(preset("rd_s3"));
  const ExperimentConfig b = parse_config(to_json(a));
  CHECK(to_json(a) == to_json(b));
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.output_dir() == fs::path("runs/rd_s3"));
  CHECK(a.grid_counts() == std::vector<int>{101, 101});
  CHECK(evaluation_grid(a).rows() == 101 * 101);
}

TEST_CASE("shipped presets") {
  const char* names[] = {"ode_s1_clean", "ode_s1_noisy", "ode_s1_sparse_clean", "ode_s2_clean", "ode_s2_noisy",
                         "ode_s2_sparse_clean", "ode_s3_clean", "ode_s3_noisy", "ode_s3_sparse_clean",
                         "rd_s1", "rd_s2", "rd_s3", "channel_newtonian_clean", "channel_newtonian_noisy",
                         "channel_corrected_clean", "channel_corrected_noisy", "channel_learned_mu_clean",
                         "channel_learned_mu_noisy"};
  for (const char* n : names) {
    INFO(n);
    const ExperimentConfig c = parse_config(preset(n));
    CHECK(c.name == n);
    CHECK(c.arch.latent_dim == 20);
    CHECK(c.arch.hidden_layers == 3);
    CHECK(c.arch.activation == Activation::Mish);
    CHECK(c.train.learning_rate == 1e-3);
    CHECK(c.train.decay_factor == 0.7);
    CHECK(c.train.decay_period == 1000);
    const bool noisy = c.scenario.noise_u > 0.0;
    CHECK(c.train.noise_free == !noisy);
    CHECK_NOTHROW((void)build_model(c));
    switch (c.scenario.problem) {
      case ProblemId::Ode:
        CHECK(c.arch.width == 64);
        CHECK(c.arch.correction_width == 64);
        CHECK(c.train.iterations == 20000);
        CHECK(c.train.beta == (noisy ? 0.05 : 1e-5));
        CHECK(c.train.phase1_iterations == (noisy ? 10000 : 0));
        CHECK(c.scenario.n_u == (std::string(n).find("_clean") != std::string::npos &&
                                         std::string(n).find("sparse") == std::string::npos
                                     ? 80
                                     : 40));
        if (noisy) {
          CHECK(c.scenario.noise_u == 0.01);
          CHECK(c.scenario.noise_f == 0.05);
        }
        break;
      case ProblemId::ReactionDiffusion:
        CHECK(c.arch.width == 128);
        CHECK(c.arch.correction_width == 64);
        CHECK(c.train.beta == 0.5);
        CHECK(c.train.iterations == 10000);
        CHECK(c.train.phase1_iterations == 5000);
        CHECK(c.scenario.noise_u == 0.02);
        CHECK(c.scenario.noise_f == 0.05);
        break;
      case ProblemId::Channel:
        CHECK(c.arch.width == 64);
        CHECK(c.arch.correction_width == (noisy ? 50 : 32));
        CHECK(c.train.beta == (noisy ? 0.5 : 1e-6));
        CHECK(c.scenario.n_u == 30);
        CHECK(c.scenario.n_f == 51);
        if (noisy) {
          CHECK(c.scenario.noise_u == 0.005);
          CHECK(c.scenario.noise_f == 0.05);
        }
        break;
    }
  }
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(-300.0, 300.0), m(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = m(rng) * std::pow(10.0, e(rng));
    double back = std::stod(format_double(v));
    CHECK(back == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("checkpoint container") {
  const Checkpoint ck = sample_checkpoint();
  const std::string bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.state.params.values() == ck.state.params.values());
  CHECK(back.state.params.layout() == ck.state.params.layout());
  CHECK(back.state.adam.v == ck.state.adam.v);
  CHECK(back.state.iteration == 17);
  REQUIRE(back.state.trace.size() == 2);
  CHECK(back.state.trace[1].data_u == -1e-300);
  CHECK(back.prior.frequencies() == ck.prior.frequencies());
  CHECK(back.prior.phases() == ck.prior.phases());
  CHECK(back.prior.seed() == ck.prior.seed());
  CHECK(to_json(back.config) == to_json(ck.config));

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS((void)decode_checkpoint(bad), "not a checkpoint file", FormatError);
  bad = bytes;
  bad[bytes.size() / 2] ^= 1;
  CHECK_THROWS_WITH_AS((void)decode_checkpoint(bad), "checkpoint checksum mismatch", FormatError);
  CHECK_THROWS_AS((void)decode_checkpoint(bytes.substr(0, 40)), FormatError);

  // a file from a future format version, with a valid checksum
  std::string future = bytes.substr(0, bytes.size() - 8);
  future[8] = 2;
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : future) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  future.append(reinterpret_cast<const char*>(&h), 8);
  CHECK_THROWS_WITH_AS((void)decode_checkpoint(future), doctest::Contains("version 2 is not supported"), FormatError);
}

TEST_CASE("atomic writes and checkpoint files") {
  const fs::path dir = fs::temp_directory_path() / "latcorr_io_test";
  fs::remove_all(dir);
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(dir / "a" / "ck.bin", ck);
  CHECK(read_file(dir / "a" / "ck.bin") == encode_checkpoint(ck));
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  save_checkpoint(dir / "a" / "ck.bin", load_checkpoint(dir / "a" / "ck.bin"));
  CHECK(read_file(dir / "a" / "ck.bin") == encode_checkpoint(ck));
  CHECK_THROWS_AS((void)read_file(dir / "missing"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("dataset files") {
  ScenarioConfig sc;
  sc.problem = ProblemId::ReactionDiffusion;
  sc.scenario = Scenario::S3;
  sc.n_b = 5;
  const DataSet d = add_noise(generate(sc), 0.02, 0.05, 0.0, 9);
  const std::string csv = dataset_csv(d, 2);
  CHECK(csv.rfind("channel,coord_1,coord_2,value\n", 0) == 0);
  const DataSet back = parse_dataset_csv(csv, ProblemId::ReactionDiffusion);
  CHECK(back.u.x == d.u.x);
  CHECK(back.u.y == d.u.y);
  CHECK(back.f.y == d.f.y);
  CHECK(back.b.x == d.b.x);
  CHECK(back.b.size() == 13);

  const fs::path dir = fs::temp_directory_path() / "latcorr_ds_test";
  write_atomic(dir / "d.csv", csv);
  DataSet noisy = d;
  noisy.noise_u = 0.02;
  noisy.noise_f = 0.05;
  const json meta = dataset_metadata(noisy, sc, make_problem(sc.problem, sc.scenario));
  CHECK(meta["counts"]["u"] == 121);
  CHECK(meta["counts"]["f"] == 195);
  CHECK(meta["constants"]["diffusion"] == 0.01);
  write_atomic(dir / "d.json", meta.dump());
  const DataSet read = read_dataset(dir / "d.csv", dir / "d.json");
  CHECK(read.noise_f == 0.05);
  CHECK(read.problem == ProblemId::ReactionDiffusion);
  fs::remove_all(dir);

  CHECK_THROWS_AS((void)parse_dataset_csv("channel,coord_1,value\nq,0.1,0.2\n", ProblemId::Ode), FormatError);
  CHECK_THROWS_AS((void)parse_dataset_csv("channel,coord_1,value\nu,0.1\n", ProblemId::Ode), FormatError);
  CHECK_THROWS_AS((void)parse_dataset_csv("channel,coord_1,value\nu,0.1,abc\n", ProblemId::Ode), FormatError);
}

TEST_CASE("summary, samples and trace tables") {
  Matrix grid(3, 1);
  grid << 0.0, 0.5, 1.0;
  const QuantitySummary q{Eigen::Vector3d(1.0, 2.0, 1.0 / 3.0), Eigen::Vector3d(0.0, 0.1, 0.2)};
  const Eigen::VectorXd ref = Eigen::Vector3d(1.0, 2.5, 0.0);
  const SummaryTable t = parse_summary_csv(summary_csv(grid, q, &ref));
  CHECK(t.grid == grid);
  CHECK(t.mean == q.mean);
  CHECK(t.std == q.std);
  REQUIRE(t.reference.has_value());
  CHECK(*t.reference == ref);
  CHECK(!parse_summary_csv(summary_csv(grid, q, nullptr)).reference.has_value());
  CHECK(summary_csv(grid, q, nullptr).rfind("coord_1,mean,std\n", 0) == 0);

  Matrix s(3, 2);
  s << 1, 2, 3, 4, 5, 6.125;
  Matrix g;
  CHECK(parse_samples_csv(samples_csv(grid, s), g) == s);
  CHECK(g == grid);

  const std::string trace = trace_csv({{0, 1, 1.5, -1, -2, -3, 4}, {100, 2, 0.5, 0, 0, 0, 1}});
  CHECK(trace == "iteration,phase,total,data_u,data_f,data_b,kl\n0,1,1.5,-1,-2,-3,4\n100,2,0.5,0,0,0,1\n");
}
