#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "peg/auction.hpp"
#include "peg/common.hpp"
#include "peg/consensus.hpp"
#include "peg/deep.hpp"
#include "peg/econ.hpp"
#include "peg/harness.hpp"
#include "peg/ocp.hpp"
#include "peg/secure.hpp"

using namespace peg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int index, const char* label, bool pass, const std::string& detail,
            double elapsed) {
  std::printf("[%d/8] %-52s %s (%s; %.2f s)\n", index, label,
              pass ? "PASS" : "FAIL", detail.c_str(), elapsed);
  if (!pass) ++failures;
}

std::string format(const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

void stability_predicate() {
  const auto start = Clock::now();
  std::mt19937_64 rng = substream(2024, "acceptance-stability");
  std::uniform_real_distribution<double> coeff(0.05, 2.0);
  std::uniform_real_distribution<double> persist(0.0, 1.0);
  std::uniform_real_distribution<double> gain(0.0, 3.0);

  int checked = 0, agreed = 0, degenerate = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    econ::TaylorParams p;
    p.alpha = coeff(rng);
    p.zeta = coeff(rng);
    p.rho = persist(rng);
    p.phi_y = gain(rng);
    p.phi_pi = gain(rng);

    const Eigen::Matrix2d closed = econ::taylor_closed_loop_matrix(p);
    const double radius =
        Eigen::EigenSolver<Eigen::Matrix2d>(closed).eigenvalues()
            .cwiseAbs()
            .maxCoeff();
    if (std::abs(radius - 1.0) <= 1e-9) {
      ++degenerate;
      continue;
    }
    ++checked;
    if (econ::is_closed_loop_stable(p) == (radius < 1.0)) ++agreed;
  }
  const double elapsed = seconds_since(start);
  report(1, "interest-rate stability predicate vs eigenvalues",
         agreed == checked && checked >= 990 && elapsed < 1.0,
         format("%d/%d agree, %d degenerate skips", agreed, checked,
                degenerate),
         elapsed);
}

// ---------------------------------------------------------------- criterion 2

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = unit(rng);
  return m;
}

ocp::ScenarioOcp random_ocp(std::uint64_t seed, int nx, int horizon,
                            int scenarios, int shared, double lambda) {
  std::mt19937_64 rng = substream(seed, "ocp-instance");
  std::normal_distribution<double> gauss(0.0, 0.3);
  ocp::ScenarioOcp prob;
  prob.sys.A = random_matrix(rng, nx, nx);
  const double radius =
      Eigen::EigenSolver<Eigen::MatrixXd>(prob.sys.A).eigenvalues()
          .cwiseAbs()
          .maxCoeff();
  prob.sys.A *= 0.9 / std::max(1e-9, radius);
  prob.sys.B = random_matrix(rng, nx, 1);
  prob.sys.Cy = Eigen::MatrixXd::Identity(1, nx);
  prob.sys.Cz = random_matrix(rng, 1, nx);
  prob.x0 = random_matrix(rng, nx, 1);
  prob.horizon = horizon;
  prob.scenario_count = scenarios;
  prob.lambda_tradeoff = lambda;
  prob.consensus_horizon = shared - 1;
  prob.u_lo = Eigen::VectorXd::Constant(horizon, -1.0);
  prob.u_hi = Eigen::VectorXd::Constant(horizon, 1.0);
  prob.noise.assign(scenarios, Eigen::MatrixXd::Zero(horizon, nx));
  for (int i = 0; i < scenarios; ++i)
    for (int k = 0; k < horizon; ++k)
      for (int d = 0; d < nx; ++d) prob.noise[i](k, d) = gauss(rng);
  return prob;
}

void mpc_agreement() {
  const auto start = Clock::now();
  std::mt19937_64 dims = substream(7, "agreement-dims");
  std::uniform_int_distribution<int> nx_draw(1, 3);
  std::uniform_int_distribution<int> horizon_draw(2, 5);
  std::uniform_real_distribution<double> lambda_draw(0.2, 0.8);
  int converged = 0, agreed = 0, worst_iters = 0;
  double worst_gap = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int nx = nx_draw(dims);
    const int horizon = horizon_draw(dims);
    const int scenarios = horizon + 2;
    const int shared = seed % 2 == 0 ? horizon : std::max(1, horizon - 1);
    const double lambda = lambda_draw(dims);
    const ocp::ScenarioOcp prob =
        random_ocp(1000 + seed, nx, horizon, scenarios, shared, lambda);

    const ocp::AdmmSolution admm =
        ocp::solve_ocp_admm(prob, 1.0, 1e-6, 1e-6, 10000);
    const ocp::CentralizedSolution central = ocp::solve_ocp_centralized(prob);
    if (admm.status == SolveStatus::Converged) ++converged;
    worst_iters = std::max(worst_iters, admm.diagnostics.iterations);
    const double gap = (admm.u - central.u).cwiseAbs().maxCoeff();
    worst_gap = std::max(worst_gap, gap);
    if (admm.status == SolveStatus::Converged && gap <= 1e-4) ++agreed;
  }
  const double elapsed = seconds_since(start);
  report(2, "scenario MPC: distributed vs centralized solver",
         agreed == 20 && elapsed < 30.0,
         format("%d/20 within 1e-4 (worst gap %.2e, max %d iters)", agreed,
                worst_gap, worst_iters),
         elapsed);
}

// ---------------------------------------------------------------- criterion 3

void auction_incentives() {
  const auto start = Clock::now();
  const harness::ProbeSummary probe = harness::auction_probe(11, 50, 21);
  const double elapsed = seconds_since(start);
  report(3, "auction misreport probe and budget balance",
         probe.instances == 50 && probe.max_gain <= 1e-6 &&
             probe.min_budget_slack >= -1e-6 && elapsed < 60.0,
         format("max gain %.2e, min budget slack %.2e over %d instances",
                probe.max_gain, probe.min_budget_slack, probe.instances),
         elapsed);
}

// ---------------------------------------------------------------- criterion 4

struct AuctionInstance {
  std::vector<auction::DemandReport> reports;
  auction::ValuationModel valuations;
  auction::AuctionConstraints constraints;
};

AuctionInstance consensus_instance(std::uint64_t seed, int users, int slots) {
  std::mt19937_64 rng = substream(seed, "acceptance-consensus");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AuctionInstance inst;
  inst.reports.resize(users);
  inst.valuations.user_slot.resize(users);
  inst.constraints.y_lo = Eigen::VectorXd::Zero(slots);
  inst.constraints.y_hi = Eigen::VectorXd::Zero(slots);
  Eigen::VectorXd cap_sum = Eigen::VectorXd::Zero(slots);
  for (int i = 0; i < users; ++i) {
    auto& r = inst.reports[i];
    r.user = i;
    r.x_min = Eigen::VectorXd::Zero(slots);
    r.x = Eigen::VectorXd::Zero(slots);
    r.x_max = Eigen::VectorXd::Zero(slots);
    inst.valuations.user_slot[i].resize(slots);
    for (int t = 0; t < slots; ++t) {
      inst.valuations.user_slot[i][t] = auction::QuadraticValuation{
          0.0, 1.0 + 3.0 * unit(rng), 0.4 + 0.8 * unit(rng)};
      r.x_max(t) = 1.0 + 2.0 * unit(rng);
      r.x(t) = 0.5 * r.x_max(t);
      cap_sum(t) += r.x_max(t);
    }
  }
  inst.valuations.cost.resize(slots);
  for (int t = 0; t < slots; ++t) {
    inst.valuations.cost[t] =
        auction::SlotCost{0.1 * unit(rng), 0.2 + 0.4 * unit(rng)};
    inst.constraints.y_hi(t) = 0.9 * cap_sum(t);
  }
  return inst;
}

void consensus_under_churn() {
  const auto start = Clock::now();
  const AuctionInstance inst = consensus_instance(64, 4, 2);

  consensus::NetworkModel reliable;
  reliable.alpha = Eigen::VectorXd::Ones(4);
  reliable.p_e = 0.0;
  reliable.seed = 1;
  const consensus::ConsensusResult base = consensus::run_dual_consensus(
      inst.reports, inst.valuations, inst.constraints, reliable);

  int converged = 0;
  double gap_sum = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    consensus::NetworkModel net;
    net.alpha = Eigen::VectorXd::Constant(4, 0.7);
    net.p_e = 0.1;
    net.seed = seed;
    const consensus::ConsensusResult run = consensus::run_dual_consensus(
        inst.reports, inst.valuations, inst.constraints, net);
    if (run.diagnostics.status == SolveStatus::Converged) ++converged;
    gap_sum += (run.x - base.x).cwiseAbs().maxCoeff();
  }
  const double mean_gap = gap_sum / 20.0;

  consensus::NetworkModel slope_net;
  slope_net.alpha = Eigen::VectorXd::Constant(4, 0.7);
  slope_net.p_e = 0.1;
  slope_net.seed = 3;
  const consensus::ConsensusResult trace = consensus::run_dual_consensus(
      inst.reports, inst.valuations, inst.constraints, slope_net, 1.0, 1.0,
      -1.0, -1.0, 4000);
  std::size_t live = trace.diagnostics.consensus_residuals.size();
  while (live > 0 && trace.diagnostics.consensus_residuals[live - 1] <= 1e-250)
    --live;
  std::vector<double> log_k, log_w;
  for (int k = 8; 2 * k <= static_cast<int>(live);
       k = static_cast<int>(k * 1.5) + 1) {
    double mean = 0;
    for (int j = k; j < 2 * k; ++j)
      mean += trace.diagnostics.consensus_residuals[j];
    mean /= k;
    log_k.push_back(std::log(static_cast<double>(k)));
    log_w.push_back(std::log(std::max(mean, 1e-300)));
  }
  double slope = 0;
  if (log_k.size() >= 3) {
    const double n = static_cast<double>(log_k.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_k.size(); ++i) {
      sx += log_k[i];
      sy += log_w[i];
      sxx += log_k[i] * log_k[i];
      sxy += log_k[i] * log_w[i];
    }
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }

  const double elapsed = seconds_since(start);
  report(4, "consensus auction under an unreliable network",
         base.diagnostics.status == SolveStatus::Converged &&
             converged == 20 && mean_gap <= 1e-2 && slope <= -0.8 &&
             elapsed < 120.0,
         format("%d/20 converged, mean gap %.2e, residual slope %.2f",
                converged, mean_gap, slope),
         elapsed);
}

// ---------------------------------------------------------------- criterion 5

void separable_dataset(std::uint64_t seed, int points, Eigen::MatrixXd& x,
                       Eigen::MatrixXd& y) {
  std::mt19937_64 rng = substream(seed, "separable-cloud");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Eigen::Vector2d w_true(1.3, -0.8);
  const double b_true = 0.2;
  x.resize(3, points);
  y.resize(1, points);
  int n = 0;
  while (n < points) {
    const Eigen::Vector2d p(2.0 * unit(rng), 2.0 * unit(rng));
    const double margin = w_true.dot(p) + b_true;
    if (std::abs(margin) < 0.2) continue;
    x(0, n) = p(0);
    x(1, n) = p(1);
    x(2, n) = 1.0;
    y(0, n) = margin > 0 ? 1.0 : -1.0;
    ++n;
  }
}

void deep_trainer() {
  const auto start = Clock::now();
  Eigen::MatrixXd x, y;
  separable_dataset(21, 500, x, y);

  deep::LayeredNetwork net =
      deep::make_network({3, 1}, {deep::Activation::Identity}, 4);
  deep::TrainOptions hinge_opt;
  hinge_opt.loss = deep::Loss::Hinge;
  hinge_opt.max_sweeps = 50;
  const deep::TrainResult hinge = deep::train_admm(net, x, y, hinge_opt);
  const Eigen::MatrixXd scores = deep::forward(hinge.net, x);
  int correct = 0;
  for (int n = 0; n < x.cols(); ++n)
    if ((scores(0, n) >= 0 ? 1.0 : -1.0) == y(0, n)) ++correct;
  const double accuracy = static_cast<double>(correct) / x.cols();

  deep::TrainOptions squared_opt;
  squared_opt.loss = deep::Loss::Squared;
  squared_opt.max_sweeps = 50;
  const deep::TrainResult squared = deep::train_admm(net, x, y, squared_opt);
  const double fit = (deep::forward(squared.net, x) - y).squaredNorm();
  const Eigen::MatrixXd w_ls =
      y * x.transpose() * (x * x.transpose()).ldlt().solve(
                              Eigen::MatrixXd::Identity(3, 3));
  const double best_fit = (w_ls * x - y).squaredNorm();

  const double elapsed = seconds_since(start);
  report(5, "gradient-free trainer on a separable cloud",
         accuracy >= 0.95 && fit <= 1.01 * best_fit && elapsed < 30.0,
         format("accuracy %.3f, squared loss %.4f vs least squares %.4f",
                accuracy, fit, best_fit),
         elapsed);
}

// ---------------------------------------------------------------- criterion 6

void secure_layer() {
  const auto start = Clock::now();
  std::mt19937_64 rng = substream(303, "acceptance-secure");
  std::uniform_int_distribution<std::uint64_t> uniform(
      0, secure::kDefaultPrime - 1);
  std::uniform_int_distribution<std::uint64_t> nonzero(
      1, secure::kDefaultPrime - 1);
  std::uniform_int_distribution<int> party_count(1, 8);
  const std::uint64_t alpha = uniform(rng);

  int roundtrips = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const secure::FieldElement a = secure::make_element(uniform(rng));
    const secure::SharedValue sv =
        secure::share(a, party_count(rng), alpha, rng);
    if (secure::reconstruct(sv).value == a.value &&
        secure::mac_check(sv, alpha, a))
      ++roundtrips;
  }

  int tamper_accepted = 0;
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 100000; ++trial) {
    const secure::FieldElement a = secure::make_element(uniform(rng));
    secure::SharedValue sv = secure::share(a, 3, alpha, rng);
    const int j = pick(rng);
    sv.shares[j] = secure::add_mod(sv.shares[j], nonzero(rng), sv.prime);
    sv.mac_shares[j] = secure::add_mod(sv.mac_shares[j], uniform(rng),
                                       sv.prime);
    if (secure::mac_check(sv, alpha, secure::reconstruct(sv)))
      ++tamper_accepted;
  }
  const double tamper_rate = tamper_accepted / 100000.0;

  const AuctionInstance inst = consensus_instance(91, 3, 1);
  consensus::NetworkModel net;
  net.alpha = Eigen::VectorXd::Ones(3);
  net.p_e = 0.0;
  net.seed = 15;
  secure::CommittedRunOptions base_options;
  base_options.seed = 5;
  const secure::CommittedRunResult base = secure::committed_protocol_run(
      inst.reports, inst.valuations, inst.constraints, net, base_options);
  const int window = std::min(60, base.diagnostics.iterations - 3);

  int attributed = 0;
  if (base.report.clean() && window >= 10) {
    for (int fault_case = 0; fault_case < 50; ++fault_case) {
      const int user = fault_case % 3;
      const int round = 2 + (fault_case * 7) % window;
      const double bias =
          (fault_case % 2 == 0 ? 1.0 : -1.0) * (0.05 + 0.005 * fault_case);
      secure::CommittedRunOptions options;
      options.seed = 5;
      options.faults = {consensus::WireFault{user, bias, round}};
      const secure::CommittedRunResult run = secure::committed_protocol_run(
          inst.reports, inst.valuations, inst.constraints, net, options);
      if (run.report.deviations.size() == 1 &&
          run.report.deviations[0].node == user &&
          run.report.deviations[0].round == round)
        ++attributed;
    }
  }

  const double elapsed = seconds_since(start);
  report(6, "secret shares, MAC soundness, fault attribution",
         roundtrips == 10000 && tamper_rate <= 1e-3 && attributed == 50 &&
             elapsed < 120.0,
         format("10^4 round trips %s, tamper rate %.1e, %d/50 attributed",
                roundtrips == 10000 ? "exact" : "BROKEN", tamper_rate,
                attributed),
         elapsed);
}

// ---------------------------------------------------------------- criterion 7

void stabilisation_headline() {
  const auto start = Clock::now();
  int wins = 0;
  double ratio_sum = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    harness::ExperimentConfig controlled;
    controlled.seed = seed;
    harness::ExperimentConfig baseline = controlled;
    baseline.baseline = true;
    const harness::RunArtifacts run_c = harness::run_experiment(controlled);
    const harness::RunArtifacts run_b = harness::run_experiment(baseline);
    if (run_c.price_variance < run_b.price_variance) ++wins;
    ratio_sum += run_c.price_variance / run_b.price_variance;
  }
  const double mean_ratio = ratio_sum / 30.0;
  const double elapsed = seconds_since(start);
  report(7, "closed-loop price variance vs uncontrolled GBM",
         wins >= 28 && mean_ratio <= 0.8 && elapsed < 300.0,
         format("%d/30 paired wins, mean variance ratio %.3f", wins,
                mean_ratio),
         elapsed);
}

// ---------------------------------------------------------------- criterion 8

void determinism() {
  const auto start = Clock::now();
  bool identical = true;
  for (harness::ModelKind model :
       {harness::ModelKind::Collateralised, harness::ModelKind::Taylor}) {
    harness::ExperimentConfig cfg;
    cfg.seed = 12;
    cfg.epochs = 80;
    cfg.model = model;
    cfg.predictor_warmup = 32;
    const std::string a = harness::artifacts_to_csv(harness::run_experiment(cfg));
    const std::string b = harness::artifacts_to_csv(harness::run_experiment(cfg));
    identical = identical && a == b && !a.empty();
  }
  const double elapsed = seconds_since(start);
  report(8, "byte-identical CSV under a fixed seed", identical,
         identical ? "collateralised and interest-rate runs match"
                   : "byte mismatch",
         elapsed);
}

}  // namespace

int main() {
  std::printf("acceptance checks\n");
  stability_predicate();
  mpc_agreement();
  auction_incentives();
  consensus_under_churn();
  deep_trainer();
  secure_layer();
  stabilisation_headline();
  determinism();
  if (failures == 0) {
    std::printf("all 8 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", failures);
  return 1;
}
