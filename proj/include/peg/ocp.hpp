#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "peg/common.hpp"

namespace peg::ocp {

struct LinearSystem {
  Eigen::MatrixXd A;    // n_x x n_x
  Eigen::MatrixXd B;    // n_x x n_u
  Eigen::MatrixXd Cy;   // n_y x n_x
  Eigen::MatrixXd Cz;   // n_z x n_x

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  int ny() const { return static_cast<int>(Cy.rows()); }
  int nz() const { return static_cast<int>(Cz.rows()); }
};

void check_dimensions(const LinearSystem& sys);

struct ScenarioOcp {
  LinearSystem sys;
  Eigen::VectorXd x0;
  int horizon = 1;         // N
  int scenario_count = 2;  // S
  std::vector<Eigen::MatrixXd> noise;  // per scenario: horizon x n_x
  double lambda_tradeoff = 0.5;
  Eigen::VectorXd u_lo;  // length horizon * n_u
  Eigen::VectorXd u_hi;
  int consensus_horizon = 0;  // steps 0..consensus_horizon share inputs

  int shared_input_count() const;  // in input coordinates
};

void validate(const ScenarioOcp& ocp);

// states rows 1..N, controlled outputs rows 1..N
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_scenario(
    const LinearSystem& sys, const Eigen::VectorXd& x0,
    const Eigen::MatrixXd& u, const Eigen::MatrixXd& w);

double exchange_rate_cost(const Eigen::VectorXd& prices);

double mean_variance_objective(const Eigen::VectorXd& psi,
                               double lambda_tradeoff);

// per-scenario cumulative output as an affine function of that scenario's
// stacked inputs: psi_i = s . u_i + c_i (s shared across scenarios)
struct CostSensitivity {
  Eigen::VectorXd s;
  Eigen::VectorXd offsets;
};

CostSensitivity cost_sensitivity(const ScenarioOcp& ocp);

double evaluate_objective(const ScenarioOcp& ocp, const Eigen::MatrixXd& u_all);

struct CentralizedSolution {
  Eigen::MatrixXd u;  // scenario_count x (horizon * n_u)
  double objective = 0;
  int sweeps = 0;
};

CentralizedSolution solve_ocp_centralized(const ScenarioOcp& ocp);

struct AdmmDiagnostics {
  std::vector<double> primal_residuals;
  std::vector<double> dual_residuals;
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  int iterations = 0;
};

struct AdmmSplit {
  // problem data
  int scenario_count = 0;
  int input_dim = 0;     // horizon * n_u per scenario
  int shared_inputs = 0;
  double lambda_tradeoff = 0;
  double lambda_spread = 0;  // (1 - lambda) / (S - 1)
  double rho = 1.0;
  Eigen::VectorXd s;
  Eigen::VectorXd offsets;
  Eigen::VectorXd u_lo, u_hi;

  // stacked constraint data of the rewritten problem
  Eigen::MatrixXd a_stack, b_stack, c_stack, l_stack;
  Eigen::VectorXd w_stack;
  Eigen::MatrixXd m1, m2, h;
  Eigen::VectorXd g;

  // iterates: y1 = (u_copy, states, outputs, psi_copy, mu_copy),
  //           y2 = (u, psi, mu), scaled duals eta
  Eigen::MatrixXd u_copy;   // S x input_dim
  Eigen::VectorXd psi_copy; // S
  double mu_copy = 0;
  std::vector<Eigen::MatrixXd> states;   // per scenario, horizon x n_x
  std::vector<Eigen::MatrixXd> outputs;  // per scenario, horizon x n_z
  Eigen::MatrixXd u;        // S x input_dim
  Eigen::VectorXd psi;      // S
  double mu = 0;
  double eta1 = 0, eta2 = 0;
  Eigen::MatrixXd eta3;     // S x input_dim
  Eigen::VectorXd eta4;     // S

  Eigen::MatrixXd k_inverse;  // (S+1)-dim system of the (psi, mu) update

  ScenarioOcp problem;
  AdmmDiagnostics diagnostics;

  Eigen::VectorXd stack_y1() const;
  Eigen::VectorXd stack_y2() const;
  double split_objective() const;  // g . y1 + y2' H y2
};

AdmmSplit build_admm_split(const ScenarioOcp& ocp, double rho = 1.0);

void admm_iterate(AdmmSplit& split);

bool check_stopping(const AdmmDiagnostics& diag, const AdmmSplit& split);

struct AdmmSolution {
  Eigen::MatrixXd u;
  double objective = 0;
  AdmmDiagnostics diagnostics;
  SolveStatus status = SolveStatus::Converged;
};

AdmmSolution solve_ocp_admm(const ScenarioOcp& ocp, double rho = 1.0,
                            double eps_primal = 1e-6, double eps_dual = 1e-6,
                            int max_iterations = 10000);

void save_ocp(const ScenarioOcp& ocp, const std::string& path);
ScenarioOcp load_ocp(const std::string& path);

}  // namespace peg::ocp
