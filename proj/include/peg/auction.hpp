#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "peg/common.hpp"

namespace peg::auction {

struct DemandReport {
  int user = 0;
  Eigen::VectorXd x_min;  // per slot
  Eigen::VectorXd x;      // demanded amount per slot
  Eigen::VectorXd x_max;
};

struct QuadraticValuation {
  double a = 0, b = 0, c = 0;  // a + b*x - c*x^2, b >= 0, c >= 0
  double value(double x) const { return a + b * x - c * x * x; }
  double marginal(double x) const { return b - 2 * c * x; }
};

struct SlotCost {
  double k0 = 0, k2 = 0;  // k0 + k2*y^2
  double value(double y) const { return k0 + k2 * y * y; }
};

struct ValuationModel {
  std::vector<std::vector<QuadraticValuation>> user_slot;  // [user][slot]
  std::vector<SlotCost> cost;                              // [slot]
};

struct AuctionConstraints {
  Eigen::VectorXd y_lo;  // per-slot issuance bounds
  Eigen::VectorXd y_hi;
};

struct WelfareSolution {
  Eigen::MatrixXd x;  // users x slots
  Eigen::VectorXd y;  // slots
  double welfare = 0;
  Eigen::VectorXd clearing_price;  // slots
};

struct AuctionOutcome {
  Eigen::MatrixXd allocation;
  Eigen::VectorXd issuance;
  Eigen::MatrixXd payments;
  double welfare = 0;
  std::vector<Eigen::MatrixXd> exclusions;  // x^{-i} per user, row i zeroed
  double manager_utility = 0;
};

void validate_instance(const std::vector<DemandReport>& reports,
                       const ValuationModel& valuations,
                       const AuctionConstraints& constraints);

WelfareSolution solve_welfare(const std::vector<DemandReport>& reports,
                              const ValuationModel& valuations,
                              const AuctionConstraints& constraints);

Eigen::MatrixXd solve_excluding(const std::vector<DemandReport>& reports,
                                const ValuationModel& valuations,
                                int excluded_user);

double vcg_payment(const AuctionOutcome& outcome,
                   const ValuationModel& valuations, int user, int slot);

double user_utility(const ValuationModel& valuations,
                    const Eigen::MatrixXd& allocation,
                    const Eigen::MatrixXd& payments, int user);

AuctionOutcome run_auction(const std::vector<DemandReport>& reports,
                           const ValuationModel& valuations,
                           const AuctionConstraints& constraints);

// Max utility gain user i can obtain over a grid of demand misreports; the
// truthful report is always evaluated as the baseline. Misreports that make
// the welfare solver allocate beyond the user's true x_max void the
// allocation and double the charged payment.
double strategyproofness_probe(const std::vector<DemandReport>& reports,
                               const ValuationModel& valuations,
                               const AuctionConstraints& constraints, int user,
                               const std::vector<double>& demand_offsets,
                               const std::vector<double>& bound_offsets = {});

void save_instance(const std::vector<DemandReport>& reports,
                   const ValuationModel& valuations,
                   const AuctionConstraints& constraints,
                   const std::string& path);

void load_instance(const std::string& path, std::vector<DemandReport>& reports,
                   ValuationModel& valuations, AuctionConstraints& constraints);

void save_outcome_csv(const AuctionOutcome& outcome, const std::string& path);

}  // namespace peg::auction
