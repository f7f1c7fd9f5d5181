#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "peg/common.hpp"
#include "peg/harness.hpp"

namespace {

namespace fs = std::filesystem;
using peg::harness::ExperimentConfig;
using peg::harness::RunArtifacts;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool baseline = false;
  bool have_seed = false;
  bool have_threads = false;
};

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) {
      throw peg::ConfigError(
          {"cannot open config file '" + flags.config_path + "'"});
    }
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = peg::harness::parse_config_text(buf.str());
  }
  if (flags.have_seed) cfg.seed = flags.seed;
  if (flags.have_threads) cfg.threads = flags.threads;
  if (flags.baseline) cfg.baseline = true;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  peg::harness::validate_config(cfg);
  return cfg;
}

std::string prepare_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

int cmd_run(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  RunArtifacts artifacts = peg::harness::run_experiment(cfg);
  const std::string path = prepare_out(
      cfg.out_dir, cfg.baseline ? "baseline.csv" : "run.csv");
  peg::harness::save_artifacts_csv(artifacts, path);
  std::printf("model=%s seed=%llu epochs=%zu\n",
              peg::harness::model_name(cfg.model).c_str(),
              static_cast<unsigned long long>(cfg.seed),
              artifacts.rows.size());
  std::printf("price_variance=%.17g\n", artifacts.price_variance);
  std::printf("peg_deviation=%.17g\n", artifacts.peg_deviation);
  std::printf("csv=%s\n", path.c_str());
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b) {
  RunArtifacts a = peg::harness::load_artifacts_csv(path_a);
  RunArtifacts b = peg::harness::load_artifacts_csv(path_b);
  peg::harness::CompareSummary summary = peg::harness::compare_runs(a, b);
  std::printf("epochs=%d\n", summary.epochs);
  std::fputs(peg::harness::compare_to_text(summary).c_str(), stdout);
  return 0;
}

int cmd_stability(const CommonFlags& flags, int grid, double phi_y_max,
                  double phi_pi_max) {
  ExperimentConfig cfg = resolve_config(flags);
  const std::string csv = peg::harness::stability_region_csv(
      cfg.taylor, grid, phi_y_max, phi_pi_max, cfg.threads);
  const std::string path = prepare_out(cfg.out_dir, "stability_region.csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << csv;
  std::printf("grid=%d csv=%s\n", grid, path.c_str());
  return 0;
}

int cmd_probe(const CommonFlags& flags, int instances, int grid) {
  ExperimentConfig cfg = resolve_config(flags);
  peg::harness::ProbeSummary probe =
      peg::harness::auction_probe(cfg.seed, instances, grid);
  const std::string path = prepare_out(cfg.out_dir, "auction_probe.csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << probe.csv;
  std::printf("instances=%d max_gain=%.17g min_budget_slack=%.17g csv=%s\n",
              probe.instances, probe.max_gain, probe.min_budget_slack,
              path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stablecoin policy stack: simulation and analysis runner"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path,
                    "key = value configuration file");
    sub->add_option("--out", flags.out_dir, "output directory");
    sub->add_option("--seed", flags.seed, "seed override")
        ->each([&](const std::string&) { flags.have_seed = true; });
    sub->add_option("--threads", flags.threads, "worker threads")
        ->each([&](const std::string&) { flags.have_threads = true; });
  };

  CLI::App* run = app.add_subcommand("run", "simulate one seeded experiment");
  add_common(run);
  run->add_flag("--baseline", flags.baseline,
                "disable all control layers (uncontrolled price path)");

  CLI::App* compare =
      app.add_subcommand("compare", "diff two run artifact CSV files");
  std::string path_a, path_b;
  compare->add_option("a", path_a, "first run CSV")->required();
  compare->add_option("b", path_b, "second run CSV")->required();

  CLI::App* stab = app.add_subcommand(
      "stability-region", "sweep policy-rule gains and emit the stable set");
  add_common(stab);
  int grid = 41;
  double phi_y_max = 3.0, phi_pi_max = 3.0;
  stab->add_option("--grid", grid, "lattice points per axis");
  stab->add_option("--phi-y-max", phi_y_max, "output-gap gain sweep limit");
  stab->add_option("--phi-pi-max", phi_pi_max, "inflation gain sweep limit");

  CLI::App* probe = app.add_subcommand(
      "auction-probe", "misreport sweep over random auction instances");
  add_common(probe);
  int instances = 25, probe_grid = 21;
  probe->add_option("--instances", instances, "random instances to draw");
  probe->add_option("--grid", probe_grid, "misreport grid points");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(flags);
    if (compare->parsed()) return cmd_compare(path_a, path_b);
    if (stab->parsed()) return cmd_stability(flags, grid, phi_y_max,
                                             phi_pi_max);
    if (probe->parsed()) return cmd_probe(flags, instances, probe_grid);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const peg::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const peg::IterationLimitError& e) {
    std::cerr << "iteration limit: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
