#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "peg/common.hpp"

namespace peg::econ {

struct SupplyState {
  long t = 0;
  double s_max = 0;
  double s_outstanding = 0;
  double s_unissued = 0;
  double s_initial = 0;
  std::vector<double> s_minted_history;
  double reserve = 0;
  double collateral_ratio = 1.0;
  double br_max = 0;
  double auc_max = 0;
  double lambda_max = 1.0;
};

SupplyState make_supply_state(double s_max, double s_outstanding,
                              double collateral_ratio, double br_max,
                              double auc_max, double lambda_max);
void check_invariants(const SupplyState& s);

SupplyState step_block_reward(const SupplyState& s, double br);

struct Interval {
  double lo = 0;
  double hi = 0;
};

SupplyState apply_auction_issuance(const SupplyState& s, double auc_coins,
                                   const std::vector<double>& bids,
                                   const std::vector<Interval>& bid_bounds = {});

struct PricePath {
  std::vector<double> prices;
  double mu = 0;
  double sigma = 0;
  double dt = 1.0;

  std::vector<double> first_differences() const;
};

double gbm_step(double p, double mu, double sigma, double dt, double noise,
                double price_floor = 1e-9);

struct AdjustedControls {
  double s_max = 0;
  double br = 0;
  double auc = 0;
  double collateral_ratio = 1.0;
};

AdjustedControls adjust_controls(const SupplyState& s, double br_prev,
                                 double auc_prev, double p_now, double p_prev);

struct TaylorParams {
  double alpha = 0;
  double rho = 0;
  double zeta = 0;
  double phi_y = 0;
  double phi_pi = 0;
  double i_star = 0;
  double pi_star = 0;
  double r_star = 0;
  double beta_discount = 0.95;
  double lambda_weight = 0.5;
  int horizon = 1;
  bool allow_negative_rates = false;
};

Eigen::Matrix2d taylor_closed_loop_matrix(const TaylorParams& p);
bool is_closed_loop_stable(const TaylorParams& p);

struct TaylorHorizon {
  double r_squared = 0.1;
  double s_squared = 0.0;
  int move_block = 0;  // 0 means every step free
  double u_prev = 0.0;
};

Eigen::VectorXd taylor_mpc_solve(const TaylorParams& p,
                                 const Eigen::Vector2d& x0,
                                 const TaylorHorizon& h = {});

struct DepreciationSchedule {
  double d_rate = 0.0;
  // (mint epoch, minted amount) pairs
  std::vector<std::pair<long, double>> minted_by_epoch;
};

double outstanding_with_depreciation(const DepreciationSchedule& sched,
                                     long now);

}  // namespace peg::econ
