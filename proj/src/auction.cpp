#include "peg/auction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace peg::auction {

namespace {

constexpr double kCouplingTol = 1e-6;

double clip(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

double user_demand_at_price(const QuadraticValuation& v, double p, double lo,
                            double hi) {
  if (v.c > 1e-15) return clip((v.b - p) / (2 * v.c), lo, hi);
  return v.b - p > 0 ? hi : lo;
}

double issuance_at_price(const SlotCost& cost, double p, double y_lo,
                         double y_hi) {
  if (cost.k2 > 1e-15) return clip(p / (2 * cost.k2), y_lo, y_hi);
  return p > 0 ? y_hi : y_lo;
}

}  // namespace

void validate_instance(const std::vector<DemandReport>& reports,
                       const ValuationModel& valuations,
                       const AuctionConstraints& constraints) {
  const int users = static_cast<int>(reports.size());
  if (users == 0) throw DimensionMismatch("auction needs at least one user");
  if (static_cast<int>(valuations.user_slot.size()) != users)
    throw DimensionMismatch("one valuation row per user required");
  const int slots = static_cast<int>(constraints.y_lo.size());
  if (slots == 0 || constraints.y_hi.size() != slots)
    throw DimensionMismatch("issuance bounds must cover at least one slot");
  if (static_cast<int>(valuations.cost.size()) != slots)
    throw DimensionMismatch("one cost entry per slot required");
  for (int t = 0; t < slots; ++t) {
    if (constraints.y_lo(t) < 0 || constraints.y_hi(t) < constraints.y_lo(t))
      throw BoundViolation("issuance bounds must satisfy 0 <= y_lo <= y_hi");
    if (valuations.cost[t].k0 < 0 || valuations.cost[t].k2 < 0)
      throw BoundViolation("cost coefficients must be non-negative");
  }
  for (int i = 0; i < users; ++i) {
    const auto& r = reports[i];
    if (r.x_min.size() != slots || r.x.size() != slots ||
        r.x_max.size() != slots)
      throw DimensionMismatch("report slot count mismatch");
    if (static_cast<int>(valuations.user_slot[i].size()) != slots)
      throw DimensionMismatch("valuation slot count mismatch");
    for (int t = 0; t < slots; ++t) {
      if (r.x_min(t) < 0 || r.x_min(t) > r.x(t) || r.x(t) > r.x_max(t))
        throw BoundViolation("report must satisfy 0 <= x_min <= x <= x_max");
      if (valuations.user_slot[i][t].b < 0 || valuations.user_slot[i][t].c < 0)
        throw BoundViolation("valuation must be concave with b >= 0, c >= 0");
    }
  }
  for (int t = 0; t < slots; ++t) {
    double min_sum = 0, max_sum = 0;
    for (const auto& r : reports) {
      min_sum += r.x_min(t);
      max_sum += r.x_max(t);
    }
    if (min_sum > constraints.y_hi(t) + kCouplingTol ||
        max_sum < constraints.y_lo(t) - kCouplingTol)
      throw InfeasibleProblem("demand box cannot meet issuance bounds");
  }
}

WelfareSolution solve_welfare(const std::vector<DemandReport>& reports,
                              const ValuationModel& valuations,
                              const AuctionConstraints& constraints) {
  validate_instance(reports, valuations, constraints);
  const int users = static_cast<int>(reports.size());
  const int slots = static_cast<int>(constraints.y_lo.size());
  WelfareSolution out;
  out.x.resize(users, slots);
  out.y.resize(slots);
  out.clearing_price.resize(slots);

  for (int t = 0; t < slots; ++t) {
    const auto excess = [&](double p) {
      double total = 0;
      for (int i = 0; i < users; ++i)
        total += user_demand_at_price(valuations.user_slot[i][t], p,
                                      reports[i].x_min(t), reports[i].x_max(t));
      return total -
             issuance_at_price(valuations.cost[t], p, constraints.y_lo(t),
                               constraints.y_hi(t));
    };
    double p_lo = -1e6, p_hi = 1e6;
    for (int it = 0; it < 200; ++it) {
      const double pm = 0.5 * (p_lo + p_hi);
      if (excess(pm) > 0)
        p_lo = pm;
      else
        p_hi = pm;
    }
    const double p = p_hi;
    double y = issuance_at_price(valuations.cost[t], p, constraints.y_lo(t),
                                 constraints.y_hi(t));
    double total = 0;
    for (int i = 0; i < users; ++i) {
      out.x(i, t) = user_demand_at_price(valuations.user_slot[i][t], p,
                                         reports[i].x_min(t),
                                         reports[i].x_max(t));
      total += out.x(i, t);
    }
    // users flat at the clearing price absorb any residual coupling gap,
    // smallest user id first
    double gap = y - total;
    for (int i = 0; i < users && std::abs(gap) > 1e-12; ++i) {
      const auto& v = valuations.user_slot[i][t];
      if (v.c > 1e-15 || std::abs(v.b - p) > 1e-6) continue;
      const double room = gap > 0 ? reports[i].x_max(t) - out.x(i, t)
                                  : reports[i].x_min(t) - out.x(i, t);
      const double take =
          gap > 0 ? std::min(gap, room) : std::max(gap, room);
      out.x(i, t) += take;
      gap -= take;
    }
    if (std::abs(gap) > 1e-12 && valuations.cost[t].k2 <= 1e-15) {
      const double y_adj = clip(y - gap, constraints.y_lo(t),
                                constraints.y_hi(t));
      gap -= y - y_adj;
      y = y_adj;
    }
    if (std::abs(gap) > kCouplingTol)
      throw SubproblemFailure("clearing price search left a coupling gap");
    out.y(t) = y;
    out.clearing_price(t) = p;
  }

  out.welfare = 0;
  for (int t = 0; t < slots; ++t) {
    for (int i = 0; i < users; ++i)
      out.welfare += valuations.user_slot[i][t].value(out.x(i, t));
    out.welfare -= valuations.cost[t].value(out.y(t));
  }
  return out;
}

Eigen::MatrixXd solve_excluding(const std::vector<DemandReport>& reports,
                                const ValuationModel& valuations,
                                int excluded_user) {
  const int users = static_cast<int>(reports.size());
  if (excluded_user < 0 || excluded_user >= users)
    throw DimensionMismatch("excluded user out of range");
  const int slots = static_cast<int>(reports.front().x_min.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(users, slots);
  for (int j = 0; j < users; ++j) {
    if (j == excluded_user) continue;
    for (int t = 0; t < slots; ++t) {
      const auto& v = valuations.user_slot[j][t];
      const double lo = reports[j].x_min(t);
      const double hi = reports[j].x_max(t);
      if (v.c > 1e-15)
        x(j, t) = clip(v.b / (2 * v.c), lo, hi);
      else
        x(j, t) = v.b > 0 ? hi : lo;
    }
  }
  return x;
}

double vcg_payment(const AuctionOutcome& outcome,
                   const ValuationModel& valuations, int user, int slot) {
  const int users = static_cast<int>(outcome.allocation.rows());
  const auto& excluded = outcome.exclusions.at(user);
  double payment = valuations.cost[slot].value(outcome.issuance(slot));
  for (int j = 0; j < users; ++j) {
    if (j == user) continue;
    payment += valuations.user_slot[j][slot].value(excluded(j, slot)) -
               valuations.user_slot[j][slot].value(outcome.allocation(j, slot));
  }
  return payment;
}

double user_utility(const ValuationModel& valuations,
                    const Eigen::MatrixXd& allocation,
                    const Eigen::MatrixXd& payments, int user) {
  const int slots = static_cast<int>(allocation.cols());
  double utility = 0;
  for (int t = 0; t < slots; ++t)
    utility += valuations.user_slot[user][t].value(allocation(user, t)) -
               payments(user, t);
  return utility;
}

AuctionOutcome run_auction(const std::vector<DemandReport>& reports,
                           const ValuationModel& valuations,
                           const AuctionConstraints& constraints) {
  const WelfareSolution welfare =
      solve_welfare(reports, valuations, constraints);
  const int users = static_cast<int>(reports.size());
  const int slots = static_cast<int>(constraints.y_lo.size());
  AuctionOutcome outcome;
  outcome.allocation = welfare.x;
  outcome.issuance = welfare.y;
  outcome.welfare = welfare.welfare;
  outcome.exclusions.reserve(users);
  for (int i = 0; i < users; ++i)
    outcome.exclusions.push_back(solve_excluding(reports, valuations, i));
  outcome.payments.resize(users, slots);
  for (int i = 0; i < users; ++i)
    for (int t = 0; t < slots; ++t)
      outcome.payments(i, t) = vcg_payment(outcome, valuations, i, t);
  double total_cost = 0;
  for (int t = 0; t < slots; ++t)
    total_cost += valuations.cost[t].value(outcome.issuance(t));
  outcome.manager_utility = outcome.payments.sum() - total_cost;
  return outcome;
}

double strategyproofness_probe(const std::vector<DemandReport>& reports,
                               const ValuationModel& valuations,
                               const AuctionConstraints& constraints, int user,
                               const std::vector<double>& demand_offsets,
                               const std::vector<double>& bound_offsets) {
  const AuctionOutcome truthful = run_auction(reports, valuations, constraints);
  const double base_utility =
      user_utility(valuations, truthful.allocation, truthful.payments, user);
  const int slots = static_cast<int>(constraints.y_lo.size());

  double max_gain = 0;
  const auto probe_one = [&](const DemandReport& misreport) {
    std::vector<DemandReport> altered = reports;
    altered[user] = misreport;
    AuctionOutcome outcome;
    try {
      outcome = run_auction(altered, valuations, constraints);
    } catch (const std::runtime_error&) {
      return;  // rejected report: no outcome, no gain
    }
    bool overstated = false;
    for (int t = 0; t < slots; ++t)
      if (outcome.allocation(user, t) > reports[user].x_max(t) + 1e-9)
        overstated = true;
    double utility;
    if (overstated) {
      // allocation voided; charged twice the assessed payment
      utility = 0;
      for (int t = 0; t < slots; ++t) {
        utility += valuations.user_slot[user][t].value(0.0);
        utility -= 2 * outcome.payments(user, t);
      }
    } else {
      utility = user_utility(valuations, outcome.allocation, outcome.payments,
                             user);
    }
    max_gain = std::max(max_gain, utility - base_utility);
  };

  for (double offset : demand_offsets) {
    DemandReport mis = reports[user];
    for (int t = 0; t < slots; ++t)
      mis.x(t) = clip(mis.x(t) + offset, mis.x_min(t), mis.x_max(t));
    probe_one(mis);
  }
  for (double offset : bound_offsets) {
    DemandReport mis = reports[user];
    for (int t = 0; t < slots; ++t) {
      mis.x_max(t) = std::max(0.0, mis.x_max(t) + offset);
      mis.x_min(t) = std::min(mis.x_min(t), mis.x_max(t));
      mis.x(t) = clip(mis.x(t), mis.x_min(t), mis.x_max(t));
    }
    probe_one(mis);
  }
  return max_gain;
}

void save_instance(const std::vector<DemandReport>& reports,
                   const ValuationModel& valuations,
                   const AuctionConstraints& constraints,
                   const std::string& path) {
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open instance file for writing");
  file << std::setprecision(17);
  const int users = static_cast<int>(reports.size());
  const int slots = static_cast<int>(constraints.y_lo.size());
  file << "users " << users << " slots " << slots << "\n";
  for (int t = 0; t < slots; ++t)
    file << "cost " << valuations.cost[t].k0 << " " << valuations.cost[t].k2
         << " bounds " << constraints.y_lo(t) << " " << constraints.y_hi(t)
         << "\n";
  for (int i = 0; i < users; ++i) {
    file << "user " << reports[i].user << "\n";
    for (int t = 0; t < slots; ++t) {
      const auto& v = valuations.user_slot[i][t];
      file << v.a << " " << v.b << " " << v.c << " " << reports[i].x_min(t)
           << " " << reports[i].x(t) << " " << reports[i].x_max(t) << "\n";
    }
  }
}

void load_instance(const std::string& path, std::vector<DemandReport>& reports,
                   ValuationModel& valuations,
                   AuctionConstraints& constraints) {
  std::ifstream file(path);
  if (!file) throw SchemaMismatch("cannot open instance file: " + path);
  std::string tag;
  int users = 0, slots = 0;
  if (!(file >> tag >> users) || tag != "users" || users < 1)
    throw SchemaMismatch("malformed instance header");
  if (!(file >> tag >> slots) || tag != "slots" || slots < 1)
    throw SchemaMismatch("malformed instance header");
  valuations.cost.assign(slots, {});
  constraints.y_lo.resize(slots);
  constraints.y_hi.resize(slots);
  for (int t = 0; t < slots; ++t) {
    std::string bounds_tag;
    if (!(file >> tag >> valuations.cost[t].k0 >> valuations.cost[t].k2 >>
          bounds_tag >> constraints.y_lo(t) >> constraints.y_hi(t)) ||
        tag != "cost" || bounds_tag != "bounds")
      throw SchemaMismatch("malformed cost line");
  }
  reports.assign(users, {});
  valuations.user_slot.assign(users, std::vector<QuadraticValuation>(slots));
  for (int i = 0; i < users; ++i) {
    if (!(file >> tag >> reports[i].user) || tag != "user")
      throw SchemaMismatch("malformed user header");
    reports[i].x_min.resize(slots);
    reports[i].x.resize(slots);
    reports[i].x_max.resize(slots);
    for (int t = 0; t < slots; ++t) {
      auto& v = valuations.user_slot[i][t];
      if (!(file >> v.a >> v.b >> v.c >> reports[i].x_min(t) >>
            reports[i].x(t) >> reports[i].x_max(t)))
        throw SchemaMismatch("malformed report line");
    }
  }
}

void save_outcome_csv(const AuctionOutcome& outcome, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open outcome file for writing");
  file << "user,slot,allocation,payment\n";
  char buf[128];
  for (int i = 0; i < outcome.allocation.rows(); ++i)
    for (int t = 0; t < outcome.allocation.cols(); ++t) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", i, t,
                    outcome.allocation(i, t), outcome.payments(i, t));
      file << buf;
    }
}

}  // namespace peg::auction
