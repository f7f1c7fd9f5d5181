#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "peg/auction.hpp"
#include "peg/common.hpp"

namespace peg::consensus {

struct NetworkModel {
  Eigen::VectorXd alpha;  // per-user online probability in (0, 1]
  double p_e = 0.0;       // per-round link interruption probability
  std::uint64_t seed = 0;

  int users() const { return static_cast<int>(alpha.size()); }
  double pair_activity(int i, int j) const;  // beta_ij
};

void validate(const NetworkModel& net);

struct ActiveSets {
  std::vector<char> users;  // Omega^k
  std::vector<char> edges;  // Psi^k, edge i = (user i, manager)
};

ActiveSets sample_active_sets(const NetworkModel& net, int iteration);

struct ManagerState {
  Eigen::VectorXd mu;      // per slot
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;
  double q = 1.0;
  double eps1 = 1e-8;
  double eps2 = 1e-8;
};

struct UserNodeState {
  Eigen::VectorXd mu_i;
  Eigen::VectorXd z_i;
  Eigen::VectorXd x_i;
  Eigen::VectorXd r_i;     // slack for C_i x <= d_i
  Eigen::VectorXd t_i;     // edge average with the manager
  Eigen::VectorXd lambda_i;
  double sigma = 1.0;
  double q = 1.0;
  Eigen::VectorXd lo;      // x >= lo (kept in the local set X_i)
  Eigen::VectorXd hi;      // dualised cap d_i
  std::vector<auction::QuadraticValuation> valuation;  // per slot
};

struct SlotProblem {
  std::vector<auction::SlotCost> cost;
  Eigen::VectorXd y_lo, y_hi;
};

ManagerState manager_step(const ManagerState& m, const SlotProblem& problem,
                          const std::vector<Eigen::VectorXd>& user_lambdas);

UserNodeState user_step(const UserNodeState& u,
                        const Eigen::VectorXd& manager_lambda, bool active);

// Exact minimiser of
//   c x^2 - b x + (x - m + 2 q t)^2 / (4 q) + max(0, x - hi + sigma z)^2 / (2 sigma)
// over x >= lo, with the slack r = max(0, hi - x - sigma z) recovered.
std::pair<double, double> proximal_allocation(double m, double t, double lo,
                                              double hi, double z,
                                              double sigma, double b, double c,
                                              double q);

struct WireFault {
  int user = -1;
  double bias = 0.0;
  int round = -1;  // -1 applies on every round the edge is active
};

using BroadcastRecorder =
    std::function<void(int round, int sender, const Eigen::VectorXd&)>;

struct ConsensusHooks {
  std::vector<WireFault> faults;
  BroadcastRecorder recorder;  // sender -1 is the manager
};

struct ConsensusDiagnostics {
  std::vector<double> consensus_residuals;   // ||lambda - lbar||^2 summed
  std::vector<double> drift_residuals;       // ||lbar - lbar_prev||^2
  std::vector<int> active_users;
  std::vector<int> active_edges;
  int iterations = 0;
  SolveStatus status = SolveStatus::IterationLimit;
};

struct ConsensusResult {
  Eigen::MatrixXd x;       // users x slots
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;  // manager copy at exit
  ConsensusDiagnostics diagnostics;
};

ConsensusResult run_dual_consensus(
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints, const NetworkModel& net,
    double q = 1.0, double sigma = 1.0, double eps1 = 1e-8, double eps2 = 1e-8,
    int max_iterations = 50000, const ConsensusHooks& hooks = {});

struct ProtocolResult {
  auction::AuctionOutcome outcome;
  ConsensusDiagnostics diagnostics;
};

ProtocolResult run_protocol_one(
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints, const NetworkModel& net,
    double q = 1.0, double sigma = 1.0, double eps1 = 1e-8, double eps2 = 1e-8,
    int max_iterations = 50000, const ConsensusHooks& hooks = {});

void save_trace_csv(const ConsensusDiagnostics& diagnostics,
                    const std::string& path);

}  // namespace peg::consensus
