#include "peg/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>

namespace peg::consensus {

double NetworkModel::pair_activity(int i, int j) const {
  const double ai = i < 0 ? 1.0 : alpha(i);  // -1 addresses the manager
  const double aj = j < 0 ? 1.0 : alpha(j);
  return ai * aj * (1 - p_e);
}

void validate(const NetworkModel& net) {
  if (net.users() == 0) throw DimensionMismatch("network has no users");
  for (int i = 0; i < net.users(); ++i)
    if (net.alpha(i) <= 0 || net.alpha(i) > 1)
      throw BoundViolation("online probabilities must lie in (0, 1]");
  if (net.p_e < 0 || net.p_e > 1)
    throw BoundViolation("link interruption probability must lie in [0, 1]");
}

ActiveSets sample_active_sets(const NetworkModel& net, int iteration) {
  validate(net);
  auto rng = substream(net.seed, "net-round-" + std::to_string(iteration));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ActiveSets sets;
  sets.users.resize(net.users());
  sets.edges.resize(net.users());
  for (int i = 0; i < net.users(); ++i)
    sets.users[i] = unit(rng) < net.alpha(i) ? 1 : 0;
  for (int i = 0; i < net.users(); ++i)
    sets.edges[i] = (sets.users[i] && unit(rng) < 1 - net.p_e) ? 1 : 0;
  return sets;
}

ManagerState manager_step(const ManagerState& m, const SlotProblem& problem,
                          const std::vector<Eigen::VectorXd>& user_lambdas) {
  const int users = static_cast<int>(user_lambdas.size());
  const int slots = static_cast<int>(m.lambda.size());
  if (users == 0) throw DimensionMismatch("manager needs at least one user");
  ManagerState next = m;
  Eigen::VectorXd t_sum = Eigen::VectorXd::Zero(slots);
  for (const auto& lam_i : user_lambdas) {
    if (lam_i.size() != slots)
      throw DimensionMismatch("user dual has wrong slot count");
    const Eigen::VectorXd t = 0.5 * (m.lambda + lam_i);
    next.mu += 2 * m.q * (m.lambda - t);
    t_sum += t;
  }
  for (int t = 0; t < slots; ++t) {
    if (problem.y_lo(t) > problem.y_hi(t))
      throw SubproblemFailure("empty issuance interval");
    const double quad = problem.cost[t].k2 + 1.0 / (4 * m.q * users);
    const double lin =
        (next.mu(t) - 2 * m.q * t_sum(t)) / (2 * m.q * users);
    next.y(t) =
        std::clamp(-lin / (2 * quad), problem.y_lo(t), problem.y_hi(t));
  }
  next.lambda =
      (-next.y - next.mu) / (2 * m.q * users) + t_sum / users;
  return next;
}

std::pair<double, double> proximal_allocation(double m, double t, double lo,
                                              double hi, double z,
                                              double sigma, double b, double c,
                                              double q) {
  if (sigma <= 0 || q <= 0)
    throw SubproblemFailure("penalty parameters must be positive");
  const double cap = hi - sigma * z;
  const double base_quad = c + 1.0 / (4 * q);
  const double base_lin = -b + (2 * q * t - m) / (2 * q);

  double best_x = 0, best_f = 0;
  bool have = false;
  if (cap >= lo) {
    double x1 = -base_lin / (2 * base_quad);
    x1 = std::clamp(x1, lo, cap);
    const double f1 = c * x1 * x1 - b * x1 +
                      std::pow(x1 - m + 2 * q * t, 2) / (4 * q);
    best_x = x1;
    best_f = f1;
    have = true;
  }
  const double quad2 = base_quad + 1.0 / (2 * sigma);
  const double lin2 = base_lin + (sigma * z - hi) / sigma;
  double x2 = -lin2 / (2 * quad2);
  x2 = std::max(x2, std::max(lo, cap));
  const double f2 = c * x2 * x2 - b * x2 +
                    std::pow(x2 - m + 2 * q * t, 2) / (4 * q) +
                    std::pow(x2 - hi + sigma * z, 2) / (2 * sigma);
  if (!have || f2 < best_f) {
    const double r = 0.0;
    return {x2, r};
  }
  const double r = std::max(0.0, hi - best_x - sigma * z);
  return {best_x, r};
}

UserNodeState user_step(const UserNodeState& u,
                        const Eigen::VectorXd& manager_lambda, bool active) {
  if (!active) return u;
  if (u.sigma <= 0 || u.q <= 0)
    throw SubproblemFailure("penalty parameters must be positive");
  const int slots = static_cast<int>(u.lambda_i.size());
  if (manager_lambda.size() != slots)
    throw DimensionMismatch("manager dual has wrong slot count");
  UserNodeState next = u;
  next.t_i = 0.5 * (u.lambda_i + manager_lambda);
  next.mu_i = u.mu_i + 2 * u.q * (u.lambda_i - next.t_i);
  for (int t = 0; t < slots; ++t) {
    const auto [x, r] = proximal_allocation(
        next.mu_i(t), next.t_i(t), u.lo(t), u.hi(t), u.z_i(t), u.sigma,
        u.valuation[t].b, u.valuation[t].c, u.q);
    next.x_i(t) = x;
    next.r_i(t) = r;
    next.z_i(t) = u.z_i(t) + (x + r - u.hi(t)) / u.sigma;
  }
  next.lambda_i = (next.x_i - next.mu_i) / (2 * u.q) + next.t_i;
  return next;
}

ConsensusResult run_dual_consensus(
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints, const NetworkModel& net,
    double q, double sigma, double eps1, double eps2, int max_iterations,
    const ConsensusHooks& hooks) {
  auction::validate_instance(reports, valuations, constraints);
  validate(net);
  if (q <= 0 || sigma <= 0)
    throw BoundViolation("penalty parameters must be positive");
  const int users = static_cast<int>(reports.size());
  if (net.users() != users)
    throw DimensionMismatch("network size must match user count");
  const int slots = static_cast<int>(constraints.y_lo.size());

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(slots);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(slots);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(slots);
  Eigen::MatrixXd t_manager = Eigen::MatrixXd::Zero(users, slots);
  Eigen::MatrixXd t_user = Eigen::MatrixXd::Zero(users, slots);
  Eigen::MatrixXd mu_i = Eigen::MatrixXd::Zero(users, slots);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(users, slots);
  Eigen::MatrixXd slack = Eigen::MatrixXd::Zero(users, slots);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(users, slots);
  Eigen::MatrixXd lambda_i = Eigen::MatrixXd::Zero(users, slots);
  Eigen::VectorXd lbar_prev = Eigen::VectorXd::Zero(slots);

  ConsensusResult out;
  out.diagnostics.status = SolveStatus::IterationLimit;
  for (int k = 1; k <= max_iterations; ++k) {
    const ActiveSets sets = sample_active_sets(net, k);

    const Eigen::VectorXd t_sum = t_manager.colwise().sum().transpose();
    for (int t = 0; t < slots; ++t) {
      const double quad = valuations.cost[t].k2 + 1.0 / (4 * q * users);
      const double lin = (mu(t) - 2 * q * t_sum(t)) / (2 * q * users);
      y(t) = std::clamp(-lin / (2 * quad), constraints.y_lo(t),
                        constraints.y_hi(t));
    }
    const Eigen::VectorXd lambda_new =
        (-y - mu) / (2 * q * users) + t_sum / users;

    for (int i = 0; i < users; ++i) {
      if (!sets.users[i]) continue;
      for (int t = 0; t < slots; ++t) {
        const auto [xv, rv] = proximal_allocation(
            mu_i(i, t), t_user(i, t), reports[i].x_min(t), reports[i].x_max(t),
            z(i, t), sigma, valuations.user_slot[i][t].b,
            valuations.user_slot[i][t].c, q);
        x(i, t) = xv;
        slack(i, t) = rv;
        z(i, t) += (xv + rv - reports[i].x_max(t)) / sigma;
      }
      lambda_i.row(i) = (x.row(i) - mu_i.row(i)) / (2 * q) + t_user.row(i);
    }
    lambda = lambda_new;
    if (hooks.recorder) hooks.recorder(k, -1, lambda);

    int edge_count = 0;
    for (int i = 0; i < users; ++i) {
      if (!sets.edges[i]) continue;
      ++edge_count;
      Eigen::VectorXd wire = lambda_i.row(i).transpose();
      for (const auto& fault : hooks.faults)
        if (fault.user == i && (fault.round < 0 || fault.round == k))
          wire.array() += fault.bias;
      if (hooks.recorder) hooks.recorder(k, i, wire);
      mu_i.row(i) += q * (lambda_i.row(i) - lambda.transpose());
      mu += q * (lambda - wire);
      t_user.row(i) = 0.5 * (lambda_i.row(i) + lambda.transpose());
      t_manager.row(i) = 0.5 * (wire + lambda).transpose();
    }

    Eigen::VectorXd lbar = lambda;
    for (int i = 0; i < users; ++i) lbar += lambda_i.row(i).transpose();
    lbar /= users + 1;
    double res_a = (lambda - lbar).squaredNorm();
    for (int i = 0; i < users; ++i)
      res_a += (lambda_i.row(i).transpose() - lbar).squaredNorm();
    const double res_b = (lbar - lbar_prev).squaredNorm();
    lbar_prev = lbar;

    out.diagnostics.consensus_residuals.push_back(res_a);
    out.diagnostics.drift_residuals.push_back(res_b);
    out.diagnostics.active_users.push_back(
        static_cast<int>(std::count(sets.users.begin(), sets.users.end(), 1)));
    out.diagnostics.active_edges.push_back(edge_count);
    out.diagnostics.iterations = k;
    if (res_a <= eps1 && res_b <= eps2) {
      out.diagnostics.status = SolveStatus::Converged;
      break;
    }
  }
  out.x = x;
  out.y = y;
  out.lambda = lambda;
  return out;
}

ProtocolResult run_protocol_one(
    const std::vector<auction::DemandReport>& reports,
    const auction::ValuationModel& valuations,
    const auction::AuctionConstraints& constraints, const NetworkModel& net,
    double q, double sigma, double eps1, double eps2, int max_iterations,
    const ConsensusHooks& hooks) {
  const int users = static_cast<int>(reports.size());
  const int slots = static_cast<int>(constraints.y_lo.size());

  // each user's standalone optimum, assembled into the exclusion allocations
  std::vector<Eigen::MatrixXd> exclusions;
  exclusions.reserve(users);
  for (int i = 0; i < users; ++i)
    exclusions.push_back(auction::solve_excluding(reports, valuations, i));

  const ConsensusResult consensus =
      run_dual_consensus(reports, valuations, constraints, net, q, sigma, eps1,
                         eps2, max_iterations, hooks);
  if (consensus.diagnostics.status != SolveStatus::Converged)
    throw IterationLimitError(
        "dual consensus did not converge within the iteration budget");

  ProtocolResult out;
  out.diagnostics = consensus.diagnostics;
  out.outcome.allocation = consensus.x;
  out.outcome.issuance = consensus.y;
  out.outcome.exclusions = exclusions;
  out.outcome.payments.resize(users, slots);
  for (int i = 0; i < users; ++i)
    for (int t = 0; t < slots; ++t)
      out.outcome.payments(i, t) =
          auction::vcg_payment(out.outcome, valuations, i, t);
  out.outcome.welfare = 0;
  double total_cost = 0;
  for (int t = 0; t < slots; ++t) {
    for (int i = 0; i < users; ++i)
      out.outcome.welfare +=
          valuations.user_slot[i][t].value(out.outcome.allocation(i, t));
    out.outcome.welfare -= valuations.cost[t].value(out.outcome.issuance(t));
    total_cost += valuations.cost[t].value(out.outcome.issuance(t));
  }
  out.outcome.manager_utility = out.outcome.payments.sum() - total_cost;
  return out;
}

void save_trace_csv(const ConsensusDiagnostics& diagnostics,
                    const std::string& path) {
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open trace file for writing");
  file << "iteration,consensus_residual,drift_residual,active_users,"
          "active_edges\n";
  char buf[160];
  for (std::size_t k = 0; k < diagnostics.consensus_residuals.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%d,%d\n", k + 1,
                  diagnostics.consensus_residuals[k],
                  diagnostics.drift_residuals[k], diagnostics.active_users[k],
                  diagnostics.active_edges[k]);
    file << buf;
  }
}

}  // namespace peg::consensus
