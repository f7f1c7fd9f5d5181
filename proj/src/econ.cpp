#include "peg/econ.hpp"

#include <algorithm>
#include <cmath>

namespace peg::econ {

namespace {

constexpr double kLedgerTol = 1e-9;

double clip(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

SupplyState with_restored_reserve(SupplyState s) {
  s.reserve = s.collateral_ratio * s.s_outstanding;
  return s;
}

}  // namespace

SupplyState make_supply_state(double s_max, double s_outstanding,
                              double collateral_ratio, double br_max,
                              double auc_max, double lambda_max) {
  SupplyState s;
  s.s_max = s_max;
  s.s_outstanding = s_outstanding;
  s.s_unissued = s_max - s_outstanding;
  s.s_initial = s_outstanding;
  s.collateral_ratio = collateral_ratio;
  s.br_max = br_max;
  s.auc_max = auc_max;
  s.lambda_max = lambda_max;
  s.reserve = collateral_ratio * s_outstanding;
  check_invariants(s);
  return s;
}

void check_invariants(const SupplyState& s) {
  const double scale = std::max(1.0, s.s_max);
  if (s.s_initial < -kLedgerTol * scale || s.s_initial > s.s_outstanding + kLedgerTol * scale ||
      s.s_outstanding > s.s_max + kLedgerTol * scale) {
    throw BoundViolation("supply ordering 0 <= initial <= outstanding <= max violated");
  }
  if (std::abs(s.s_max - (s.s_unissued + s.s_outstanding)) > kLedgerTol * scale) {
    throw BoundViolation("supply split s_max != s_unissued + s_outstanding");
  }
  if (std::abs(s.reserve - s.collateral_ratio * s.s_outstanding) >
      kLedgerTol * std::max(1.0, s.reserve)) {
    throw BoundViolation("reserve does not match collateral ratio");
  }
  if (s.collateral_ratio < 1.0 - kLedgerTol ||
      s.collateral_ratio > s.lambda_max + kLedgerTol) {
    throw BoundViolation("collateral ratio outside [1, lambda_max]");
  }
}

SupplyState step_block_reward(const SupplyState& s, double br) {
  if (br < 0 || br > s.br_max) {
    throw BoundViolation("block reward outside [0, br_max]");
  }
  if (br > s.s_unissued) {
    throw BoundViolation("block reward exceeds unissued supply");
  }
  SupplyState out = s;
  out.s_outstanding += br;
  out.s_unissued -= br;
  out.s_minted_history.push_back(br);
  return with_restored_reserve(out);
}

SupplyState apply_auction_issuance(const SupplyState& s, double auc_coins,
                                   const std::vector<double>& bids,
                                   const std::vector<Interval>& bid_bounds) {
  if (auc_coins < 0 || auc_coins > s.auc_max) {
    throw BoundViolation("auctioned amount outside [0, auc_max]");
  }
  if (auc_coins > s.s_unissued + kLedgerTol * std::max(1.0, s.s_max)) {
    throw BoundViolation("auctioned amount exceeds unissued supply");
  }
  double total = 0;
  for (double b : bids) {
    if (b < 0) throw BoundViolation("negative bid");
    total += b;
  }
  if (std::abs(total - auc_coins) > 1e-6 * std::max(1.0, auc_coins)) {
    throw ClearingMismatch("bids do not sum to the auctioned amount");
  }
  if (!bid_bounds.empty()) {
    if (bid_bounds.size() != bids.size()) {
      throw DimensionMismatch("one bound interval per bid required");
    }
    for (std::size_t i = 0; i < bids.size(); ++i) {
      if (bids[i] < bid_bounds[i].lo - kLedgerTol ||
          bids[i] > bid_bounds[i].hi + kLedgerTol) {
        throw BoundViolation("bid outside the user's [min, max] interval");
      }
    }
  }
  SupplyState out = s;
  out.s_outstanding += auc_coins;
  out.s_unissued -= auc_coins;
  out.s_minted_history.push_back(auc_coins);
  return with_restored_reserve(out);
}

std::vector<double> PricePath::first_differences() const {
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < prices.size(); ++i) {
    d.push_back(prices[i + 1] - prices[i]);
  }
  return d;
}

double gbm_step(double p, double mu, double sigma, double dt, double noise,
                double price_floor) {
  const double next = p * (1.0 + mu * dt + sigma * std::sqrt(dt) * noise);
  return std::max(next, price_floor);
}

AdjustedControls adjust_controls(const SupplyState& s, double br_prev,
                                 double auc_prev, double p_now, double p_prev) {
  const double ratio = p_now / p_prev;
  AdjustedControls out;
  out.s_max = std::max(s.s_max * ratio, s.s_outstanding);
  out.br = clip(br_prev * ratio, 0.0, s.br_max);
  out.auc = clip(auc_prev * ratio, 0.0, s.auc_max);
  out.collateral_ratio = clip(s.collateral_ratio / ratio, 1.0, s.lambda_max);
  return out;
}

Eigen::Matrix2d taylor_closed_loop_matrix(const TaylorParams& p) {
  Eigen::Matrix2d a;
  a << p.rho - p.zeta * p.phi_y, p.zeta - p.zeta * p.phi_pi,  //
      p.alpha, 1.0;
  return a;
}

bool is_closed_loop_stable(const TaylorParams& p) {
  const double pivot = p.alpha * p.zeta * (p.phi_pi - 1.0);
  const double c1 = 2.0 + 2.0 * p.rho - 2.0 * p.zeta * p.phi_y + pivot;
  const double c2 = 1.0 - p.rho + p.zeta * p.phi_y - pivot;
  return c1 > 0 && c2 > 0 && pivot > 0;
}

Eigen::VectorXd taylor_mpc_solve(const TaylorParams& p,
                                 const Eigen::Vector2d& x0,
                                 const TaylorHorizon& h) {
  const int n = p.horizon;
  if (n < 1) throw DimensionMismatch("horizon must be at least 1");
  const int m = (h.move_block <= 0 || h.move_block > n) ? n : h.move_block;

  Eigen::Matrix2d a;
  a << p.rho, p.zeta, p.alpha, 1.0;
  const Eigen::Vector2d b(-p.zeta, 0.0);
  const Eigen::Matrix2d q =
      Eigen::Vector2d(1.0 - p.lambda_weight, p.lambda_weight).asDiagonal();

  // x_hat(k) = A^k x0 + sum_{l<k} A^{k-1-l} B u_l, stacked over k = 1..n
  std::vector<Eigen::Matrix2d> a_pow(n + 1);
  a_pow[0] = Eigen::Matrix2d::Identity();
  for (int k = 1; k <= n; ++k) a_pow[k] = a * a_pow[k - 1];

  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(2 * n, n);
  Eigen::VectorXd drift(2 * n);
  for (int k = 1; k <= n; ++k) {
    drift.segment<2>(2 * (k - 1)) = a_pow[k] * x0;
    for (int j = 0; j < k; ++j) {
      gamma.block<2, 1>(2 * (k - 1), j) = a_pow[k - 1 - j] * b;
    }
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 1; k <= n; ++k) {
    w.block<2, 2>(2 * (k - 1), 2 * (k - 1)) = std::pow(p.beta_discount, k) * q;
  }

  Eigen::MatrixXd pmat = gamma.transpose() * w * gamma;
  Eigen::VectorXd qvec = 2.0 * gamma.transpose() * w * drift;
  for (int k = 0; k < n; ++k) {
    pmat(k, k) += std::pow(p.beta_discount, k) * h.r_squared;
  }
  if (h.s_squared > 0) {
    for (int k = 0; k < n; ++k) {
      const double wk = std::pow(p.beta_discount, k) * h.s_squared;
      pmat(k, k) += wk;
      if (k == 0) {
        qvec(0) -= 2.0 * wk * h.u_prev;
      } else {
        pmat(k, k - 1) -= wk;
        pmat(k - 1, k) -= wk;
        pmat(k - 1, k - 1) += wk;
      }
    }
  }

  // move blocking: u_k = v_{min(k, m-1)}
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n, m);
  for (int k = 0; k < n; ++k) block(k, std::min(k, m - 1)) = 1.0;
  Eigen::MatrixXd pv = block.transpose() * pmat * block;
  Eigen::VectorXd qv = block.transpose() * qvec;

  const double lo = p.allow_negative_rates
                        ? -std::numeric_limits<double>::infinity()
                        : -p.i_star;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) v(j) = std::max(v(j), lo);
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double step = 0;
    for (int j = 0; j < m; ++j) {
      double rest = qv(j);
      for (int l = 0; l < m; ++l) {
        if (l != j) rest += 2.0 * pv(j, l) * v(l);
      }
      const double cand = std::max(-rest / (2.0 * pv(j, j)), lo);
      step = std::max(step, std::abs(cand - v(j)));
      v(j) = cand;
    }
    if (step < 1e-13) break;
  }

  return block * v;
}

double outstanding_with_depreciation(const DepreciationSchedule& sched,
                                     long now) {
  double total = 0;
  for (const auto& [epoch, minted] : sched.minted_by_epoch) {
    if (epoch > now) continue;
    const double dep = std::min(
        static_cast<double>(now - epoch) * sched.d_rate * minted, minted);
    total += minted - dep;
  }
  return total;
}

}  // namespace peg::econ
