#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "peg/common.hpp"
#include "peg/econ.hpp"

namespace peg::harness {

enum class ModelKind { Algorithmic, Collateralised, Taylor };

std::string model_name(ModelKind model);
ModelKind parse_model(const std::string& name);

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int epochs = 200;
  ModelKind model = ModelKind::Collateralised;
  bool baseline = false;
  int threads = 1;
  std::string out_dir = ".";

  double gbm_mu = 0.0;
  double gbm_sigma = 0.05;
  double gbm_dt = 1.0;

  double supply0 = 1e6;
  double headroom = 8.0;
  double br0_frac = 0.002;
  double auc0_frac = 0.02;
  double cap_mult = 50.0;
  double lambda0 = 1.5;
  double lambda_target = 1.5;
  double lambda_max = 3.0;
  double buyback_gain = 0.033;
  double impact_depth = 8.0;

  int mpc_horizon = 3;
  int mpc_scenarios = 4;
  double mpc_lambda = 0.5;
  double mpc_rho = 1.0;
  double mpc_eps = 1e-6;
  int mpc_max_iters = 10000;

  int predictor_window = 4;
  int predictor_warmup = 128;
  int predictor_sweeps = 40;

  int auction_users = 3;
  double auction_value_slope = 2.0;
  double auction_value_curvature = 1e-7;
  double auction_cost_k0 = 0.0;
  double auction_cost_k2 = 0.0;
  double auction_user_cap = 1e7;

  bool consensus_enabled = false;
  bool secure_enabled = false;
  Eigen::VectorXd net_alpha;
  double net_p_e = 0.0;
  double consensus_q = 1.0;
  double consensus_sigma = 1.0;
  double consensus_eps = 1e-8;
  int consensus_max_iters = 50000;

  econ::TaylorParams taylor = default_taylor_params();

  static econ::TaylorParams default_taylor_params();
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& config);

struct EpochRow {
  int epoch = 0;
  double price = 1.0;
  double s_max = 0;
  double s_outstanding = 0;
  double block_reward = 0;
  double auction_issuance = 0;
  double collateral_ratio = 1.0;
  double mpc_objective = 0;
  double auction_payments = 0;
  int consensus_iterations = 0;
  std::string verification = "off";
};

struct RunArtifacts {
  std::vector<EpochRow> rows;
  double price_variance = 0;
  double peg_deviation = 0;
};

RunArtifacts run_experiment(const ExperimentConfig& config);

std::string artifacts_to_csv(const RunArtifacts& artifacts);
void save_artifacts_csv(const RunArtifacts& artifacts,
                        const std::string& path);
RunArtifacts load_artifacts_csv(const std::string& path);

struct MetricDelta {
  std::string metric;
  double a = 0;
  double b = 0;
  double delta = 0;
  double ratio = 0;
};

struct CompareSummary {
  int epochs = 0;
  std::vector<MetricDelta> metrics;
};

CompareSummary compare_runs(const RunArtifacts& a, const RunArtifacts& b);
std::string compare_to_text(const CompareSummary& summary);

std::string stability_region_csv(const econ::TaylorParams& base, int grid,
                                 double phi_y_max, double phi_pi_max,
                                 int threads = 1);

struct ProbeSummary {
  int instances = 0;
  double max_gain = 0;
  double min_budget_slack = 0;
  std::string csv;
};

ProbeSummary auction_probe(std::uint64_t seed, int instances, int grid_points);

}  // namespace peg::harness
