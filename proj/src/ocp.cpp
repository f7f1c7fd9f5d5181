#include "peg/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

namespace peg::ocp {

namespace {

Eigen::VectorXd clip(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

std::vector<Eigen::MatrixXd> matrix_powers(const Eigen::MatrixXd& a, int count) {
  std::vector<Eigen::MatrixXd> powers;
  powers.reserve(count + 1);
  powers.push_back(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  for (int k = 0; k < count; ++k) powers.push_back(a * powers.back());
  return powers;
}

}  // namespace

void check_dimensions(const LinearSystem& sys) {
  if (sys.A.rows() != sys.A.cols())
    throw DimensionMismatch("state matrix must be square");
  if (sys.B.rows() != sys.A.rows())
    throw DimensionMismatch("input matrix row count must match state dimension");
  if (sys.Cy.cols() != sys.A.rows() || sys.Cz.cols() != sys.A.rows())
    throw DimensionMismatch("output matrices must have state-dimension columns");
}

int ScenarioOcp::shared_input_count() const {
  const int shared_steps = std::min(consensus_horizon + 1, horizon);
  return shared_steps * sys.nu();
}

void validate(const ScenarioOcp& ocp) {
  check_dimensions(ocp.sys);
  if (ocp.scenario_count < 2)
    throw DegenerateScenarioSet("need at least two scenarios");
  if (ocp.horizon < 1) throw DimensionMismatch("horizon must be positive");
  if (ocp.consensus_horizon < 0 || ocp.consensus_horizon > ocp.horizon)
    throw DimensionMismatch("consensus horizon must lie within the horizon");
  if (ocp.x0.size() != ocp.sys.nx())
    throw DimensionMismatch("initial state has wrong dimension");
  if (static_cast<int>(ocp.noise.size()) != ocp.scenario_count)
    throw DimensionMismatch("need one noise trajectory per scenario");
  for (const auto& w : ocp.noise) {
    if (w.rows() != ocp.horizon || w.cols() != ocp.sys.nx())
      throw DimensionMismatch("noise trajectory must be horizon x state-dim");
  }
  const int nuu = ocp.horizon * ocp.sys.nu();
  if (ocp.u_lo.size() != nuu || ocp.u_hi.size() != nuu)
    throw DimensionMismatch("input bounds must cover the stacked horizon");
  if ((ocp.u_hi - ocp.u_lo).minCoeff() < 0)
    throw InfeasibleProblem("input box is empty");
  if (ocp.lambda_tradeoff < 0 || ocp.lambda_tradeoff > 1)
    throw BoundViolation("trade-off weight must lie in [0, 1]");
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_scenario(
    const LinearSystem& sys, const Eigen::VectorXd& x0,
    const Eigen::MatrixXd& u, const Eigen::MatrixXd& w) {
  check_dimensions(sys);
  const int n = static_cast<int>(u.rows());
  if (w.rows() != n || w.cols() != sys.nx() || u.cols() != sys.nu() ||
      x0.size() != sys.nx())
    throw DimensionMismatch("simulation inputs are inconsistently sized");
  Eigen::MatrixXd states(n, sys.nx());
  Eigen::MatrixXd outputs(n, sys.nz());
  Eigen::VectorXd x = x0;
  for (int k = 0; k < n; ++k) {
    x = sys.A * x + sys.B * u.row(k).transpose() + w.row(k).transpose();
    states.row(k) = x.transpose();
    outputs.row(k) = (sys.Cz * x).transpose();
  }
  return {states, outputs};
}

double exchange_rate_cost(const Eigen::VectorXd& prices) {
  return prices.sum();
}

double mean_variance_objective(const Eigen::VectorXd& psi,
                               double lambda_tradeoff) {
  const int count = static_cast<int>(psi.size());
  if (count < 2)
    throw DegenerateScenarioSet("spread is undefined for fewer than two scenarios");
  const double mean = psi.mean();
  const double spread = (psi.array() - mean).square().sum() / (count - 1);
  return lambda_tradeoff * mean + (1 - lambda_tradeoff) * spread;
}

CostSensitivity cost_sensitivity(const ScenarioOcp& ocp) {
  validate(ocp);
  const auto& sys = ocp.sys;
  const int nx = sys.nx(), nu = sys.nu(), n = ocp.horizon;
  const auto powers = matrix_powers(sys.A, n);
  const Eigen::RowVectorXd ones_cz =
      Eigen::RowVectorXd::Ones(sys.nz()) * sys.Cz;

  CostSensitivity out;
  out.s = Eigen::VectorXd::Zero(n * nu);
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j < k; ++j) {
      out.s.segment(j * nu, nu) +=
          (ones_cz * powers[k - 1 - j] * sys.B).transpose();
    }
  }
  out.offsets = Eigen::VectorXd::Zero(ocp.scenario_count);
  for (int i = 0; i < ocp.scenario_count; ++i) {
    for (int k = 1; k <= n; ++k) {
      Eigen::VectorXd xk = powers[k] * ocp.x0;
      for (int j = 0; j < k; ++j)
        xk += powers[k - 1 - j] * ocp.noise[i].row(j).transpose();
      out.offsets(i) += ones_cz * xk;
    }
  }
  return out;
}

double evaluate_objective(const ScenarioOcp& ocp, const Eigen::MatrixXd& u_all) {
  validate(ocp);
  const int nu = ocp.sys.nu();
  if (u_all.rows() != ocp.scenario_count ||
      u_all.cols() != ocp.horizon * nu)
    throw DimensionMismatch("input plan must be scenarios x stacked inputs");
  Eigen::VectorXd psi(ocp.scenario_count);
  for (int i = 0; i < ocp.scenario_count; ++i) {
    Eigen::MatrixXd ui(ocp.horizon, nu);
    for (int k = 0; k < ocp.horizon; ++k)
      ui.row(k) = u_all.row(i).segment(k * nu, nu);
    const auto [states, outputs] =
        simulate_scenario(ocp.sys, ocp.x0, ui, ocp.noise[i]);
    psi(i) = outputs.sum();
  }
  return mean_variance_objective(psi, ocp.lambda_tradeoff);
}

CentralizedSolution solve_ocp_centralized(const ScenarioOcp& ocp) {
  validate(ocp);
  const auto sens = cost_sensitivity(ocp);
  const int s_count = ocp.scenario_count;
  const int nuu = ocp.horizon * ocp.sys.nu();
  const int nc = ocp.shared_input_count();
  const int nt = nuu - nc;
  const int dim = nc + s_count * nt;
  const double lambda_spread = (1 - ocp.lambda_tradeoff) / (s_count - 1);

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(s_count, dim);
  for (int i = 0; i < s_count; ++i) {
    p.row(i).head(nc) = sens.s.head(nc).transpose();
    p.row(i).segment(nc + i * nt, nt) = sens.s.tail(nt).transpose();
  }
  const Eigen::RowVectorXd col_mean = p.colwise().mean();
  Eigen::MatrixXd centered = p;
  centered.rowwise() -= col_mean;
  const Eigen::VectorXd dc =
      sens.offsets.array() - sens.offsets.mean();
  const Eigen::MatrixXd q = 2 * lambda_spread * centered.transpose() * centered;
  const Eigen::VectorXd grad0 =
      (ocp.lambda_tradeoff / s_count) * p.colwise().sum().transpose() +
      2 * lambda_spread * centered.transpose() * dc;

  Eigen::VectorXd lo(dim), hi(dim);
  lo.head(nc) = ocp.u_lo.head(nc);
  hi.head(nc) = ocp.u_hi.head(nc);
  for (int i = 0; i < s_count; ++i) {
    lo.segment(nc + i * nt, nt) = ocp.u_lo.tail(nt);
    hi.segment(nc + i * nt, nt) = ocp.u_hi.tail(nt);
  }
  Eigen::VectorXd x = clip(Eigen::VectorXd::Zero(dim), lo, hi);

  CentralizedSolution out;
  const int max_sweeps = 200000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double step = 0;
    for (int j = 0; j < dim; ++j) {
      const double qjj = q(j, j);
      const double gj = grad0(j) + q.row(j).dot(x) - qjj * x(j);
      double xn;
      if (qjj <= 1e-15) {
        xn = gj > 0 ? lo(j) : (gj < 0 ? hi(j) : x(j));
      } else {
        xn = std::clamp(-gj / qjj, lo(j), hi(j));
      }
      step = std::max(step, std::abs(xn - x(j)));
      x(j) = xn;
    }
    out.sweeps = sweep + 1;
    if (step < 1e-13) break;
  }

  out.u.resize(s_count, nuu);
  for (int i = 0; i < s_count; ++i) {
    out.u.row(i).head(nc) = x.head(nc).transpose();
    out.u.row(i).tail(nt) = x.segment(nc + i * nt, nt).transpose();
  }
  out.objective = evaluate_objective(ocp, out.u);
  return out;
}

Eigen::VectorXd AdmmSplit::stack_y1() const {
  const int s_count = scenario_count;
  const int nx = problem.sys.nx(), nz = problem.sys.nz(), n = problem.horizon;
  Eigen::VectorXd y(s_count * input_dim + s_count * n * nx +
                    s_count * n * nz + s_count + 1);
  int at = 0;
  for (int i = 0; i < s_count; ++i, at += input_dim)
    y.segment(at, input_dim) = u_copy.row(i).transpose();
  for (int i = 0; i < s_count; ++i)
    for (int k = 0; k < n; ++k, at += nx)
      y.segment(at, nx) = states[i].row(k).transpose();
  for (int i = 0; i < s_count; ++i)
    for (int k = 0; k < n; ++k, at += nz)
      y.segment(at, nz) = outputs[i].row(k).transpose();
  y.segment(at, s_count) = psi_copy;
  y(at + s_count) = mu_copy;
  return y;
}

Eigen::VectorXd AdmmSplit::stack_y2() const {
  Eigen::VectorXd y(scenario_count * input_dim + scenario_count + 1);
  int at = 0;
  for (int i = 0; i < scenario_count; ++i, at += input_dim)
    y.segment(at, input_dim) = u.row(i).transpose();
  y.segment(at, scenario_count) = psi;
  y(at + scenario_count) = mu;
  return y;
}

double AdmmSplit::split_objective() const {
  const Eigen::VectorXd y2 = stack_y2();
  return g.dot(stack_y1()) + y2.dot(h * y2);
}

AdmmSplit build_admm_split(const ScenarioOcp& ocp, double rho) {
  validate(ocp);
  if (rho <= 0) throw BoundViolation("penalty parameter must be positive");

  AdmmSplit split;
  split.problem = ocp;
  split.scenario_count = ocp.scenario_count;
  split.input_dim = ocp.horizon * ocp.sys.nu();
  split.shared_inputs = ocp.shared_input_count();
  split.lambda_tradeoff = ocp.lambda_tradeoff;
  split.lambda_spread = (1 - ocp.lambda_tradeoff) / (ocp.scenario_count - 1);
  split.rho = rho;
  const auto sens = cost_sensitivity(ocp);
  split.s = sens.s;
  split.offsets = sens.offsets;
  split.u_lo = ocp.u_lo;
  split.u_hi = ocp.u_hi;

  const int s_count = split.scenario_count;
  const int nuu = split.input_dim;
  const int nx = ocp.sys.nx(), nz = ocp.sys.nz(), nu = ocp.sys.nu();
  const int n = ocp.horizon;
  const auto powers = matrix_powers(ocp.sys.A, n);

  split.a_stack.resize(n * nx, nx);
  for (int k = 1; k <= n; ++k)
    split.a_stack.middleRows((k - 1) * nx, nx) = powers[k];
  split.b_stack = Eigen::MatrixXd::Zero(n * nx, nuu);
  for (int k = 1; k <= n; ++k)
    for (int j = 0; j < k; ++j)
      split.b_stack.block((k - 1) * nx, j * nu, nx, nu) =
          powers[k - 1 - j] * ocp.sys.B;
  split.c_stack = Eigen::MatrixXd::Zero(n * nz, n * nx);
  for (int k = 0; k < n; ++k)
    split.c_stack.block(k * nz, k * nx, nz, nx) = ocp.sys.Cz;
  split.w_stack.resize(s_count, n * nx);
  for (int i = 0; i < s_count; ++i) {
    for (int k = 1; k <= n; ++k) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(nx);
      for (int j = 0; j < k; ++j)
        acc += powers[k - 1 - j] * ocp.noise[i].row(j).transpose();
      split.w_stack.row(i).segment((k - 1) * nx, nx) = acc.transpose();
    }
  }
  const int nc = split.shared_inputs;
  split.l_stack = Eigen::MatrixXd::Zero((s_count - 1) * nc, s_count * nuu);
  for (int i = 0; i + 1 < s_count; ++i) {
    split.l_stack.block(i * nc, i * nuu, nc, nc) =
        Eigen::MatrixXd::Identity(nc, nc);
    split.l_stack.block(i * nc, (i + 1) * nuu, nc, nc) =
        -Eigen::MatrixXd::Identity(nc, nc);
  }

  const int dim1 = s_count * nuu + s_count * n * nx + s_count * n * nz +
                   s_count + 1;
  const int dim2 = s_count * nuu + s_count + 1;
  const int rows = 2 + s_count * nuu + s_count;
  const int mu_copy_at = dim1 - 1;
  const int psi_copy_at = dim1 - 1 - s_count;
  const int mu_at = dim2 - 1;
  const int psi_at = dim2 - 1 - s_count;
  split.m1 = Eigen::MatrixXd::Zero(rows, dim1);
  split.m2 = Eigen::MatrixXd::Zero(rows, dim2);
  split.m1(0, mu_copy_at) = 1;
  split.m2.row(0).segment(psi_at, s_count).setConstant(-1.0 / s_count);
  split.m1(1, mu_copy_at) = 1;
  split.m2(1, mu_at) = -1;
  split.m1.block(2, 0, s_count * nuu, s_count * nuu) =
      Eigen::MatrixXd::Identity(s_count * nuu, s_count * nuu);
  split.m2.block(2, 0, s_count * nuu, s_count * nuu) =
      -Eigen::MatrixXd::Identity(s_count * nuu, s_count * nuu);
  split.m1.block(2 + s_count * nuu, psi_copy_at, s_count, s_count) =
      Eigen::MatrixXd::Identity(s_count, s_count);
  split.m2.block(2 + s_count * nuu, psi_at, s_count, s_count) =
      -Eigen::MatrixXd::Identity(s_count, s_count);

  split.h = Eigen::MatrixXd::Zero(dim2, dim2);
  split.h.block(psi_at, psi_at, s_count, s_count) =
      split.lambda_spread *
      Eigen::MatrixXd::Identity(s_count, s_count);
  split.h.block(psi_at, mu_at, s_count, 1).setConstant(-split.lambda_spread);
  split.h.block(mu_at, psi_at, 1, s_count).setConstant(-split.lambda_spread);
  split.h(mu_at, mu_at) = s_count * split.lambda_spread;
  split.g = Eigen::VectorXd::Zero(dim1);
  split.g(mu_copy_at) = split.lambda_tradeoff;

  Eigen::MatrixXd k_mat(s_count + 1, s_count + 1);
  k_mat.setZero();
  k_mat.topLeftCorner(s_count, s_count) =
      (2 * split.lambda_spread + rho) *
          Eigen::MatrixXd::Identity(s_count, s_count) +
      (rho / (static_cast<double>(s_count) * s_count)) *
          Eigen::MatrixXd::Ones(s_count, s_count);
  k_mat.topRightCorner(s_count, 1).setConstant(-2 * split.lambda_spread);
  k_mat.bottomLeftCorner(1, s_count).setConstant(-2 * split.lambda_spread);
  k_mat(s_count, s_count) = 2 * s_count * split.lambda_spread + rho;
  split.k_inverse = k_mat.inverse();

  split.u = Eigen::MatrixXd::Zero(s_count, nuu);
  for (int i = 0; i < s_count; ++i)
    split.u.row(i) =
        clip(Eigen::VectorXd::Zero(nuu), ocp.u_lo, ocp.u_hi).transpose();
  split.psi = split.u * split.s + split.offsets;
  split.mu = split.psi.mean();
  split.u_copy = split.u;
  split.psi_copy = split.psi;
  split.mu_copy = split.mu;
  split.eta3 = Eigen::MatrixXd::Zero(s_count, nuu);
  split.eta4 = Eigen::VectorXd::Zero(s_count);
  split.states.assign(s_count, Eigen::MatrixXd::Zero(n, nx));
  split.outputs.assign(s_count, Eigen::MatrixXd::Zero(n, nz));
  for (int i = 0; i < s_count; ++i) {
    Eigen::MatrixXd ui(n, nu);
    for (int k = 0; k < n; ++k)
      ui.row(k) = split.u_copy.row(i).segment(k * nu, nu);
    std::tie(split.states[i], split.outputs[i]) =
        simulate_scenario(ocp.sys, ocp.x0, ui, ocp.noise[i]);
  }
  return split;
}

void admm_iterate(AdmmSplit& split) {
  const int s_count = split.scenario_count;
  const int nuu = split.input_dim;
  const int nc = split.shared_inputs;
  const int nt = nuu - nc;
  const int nu = split.problem.sys.nu();
  const int n = split.problem.horizon;
  const double rho = split.rho;
  const Eigen::VectorXd& s = split.s;
  const double s_sq = s.squaredNorm();

  const double a1 = split.psi.mean() - split.eta1;
  const double a2 = split.mu - split.eta2;
  split.mu_copy = 0.5 * (a1 + a2) - split.lambda_tradeoff / (2 * rho);
  for (int i = 0; i < s_count; ++i) {
    const Eigen::VectorXd v =
        split.u.row(i).transpose() - split.eta3.row(i).transpose();
    const double target = split.psi(i) - split.eta4(i);
    const Eigen::VectorXd rhs = v + s * (target - split.offsets(i));
    const Eigen::VectorXd uc = rhs - s * (s.dot(rhs) / (1 + s_sq));
    split.u_copy.row(i) = uc.transpose();
    split.psi_copy(i) = s.dot(uc) + split.offsets(i);
    Eigen::MatrixXd ui(n, nu);
    for (int k = 0; k < n; ++k)
      ui.row(k) = split.u_copy.row(i).segment(k * nu, nu);
    std::tie(split.states[i], split.outputs[i]) = simulate_scenario(
        split.problem.sys, split.problem.x0, ui, split.problem.noise[i]);
  }

  const Eigen::MatrixXd u_prev = split.u;
  const Eigen::VectorXd psi_prev = split.psi;
  const double mu_prev = split.mu;

  const Eigen::MatrixXd t3 = split.u_copy + split.eta3;
  const Eigen::VectorXd head_mean =
      t3.leftCols(nc).colwise().mean().transpose();
  const Eigen::VectorXd head =
      clip(head_mean, split.u_lo.head(nc), split.u_hi.head(nc));
  for (int i = 0; i < s_count; ++i) {
    split.u.row(i).head(nc) = head.transpose();
    split.u.row(i).tail(nt) =
        clip(t3.row(i).tail(nt).transpose(), split.u_lo.tail(nt),
             split.u_hi.tail(nt))
            .transpose();
  }
  const double b1 = split.mu_copy + split.eta1;
  const double b2 = split.mu_copy + split.eta2;
  const Eigen::VectorXd b4 = split.psi_copy + split.eta4;
  Eigen::VectorXd rhs(s_count + 1);
  rhs.head(s_count) =
      Eigen::VectorXd::Constant(s_count, (rho / s_count) * b1) + rho * b4;
  rhs(s_count) = rho * b2;
  const Eigen::VectorXd sol = split.k_inverse * rhs;
  split.psi = sol.head(s_count);
  split.mu = sol(s_count);

  const double r1 = split.mu_copy - split.psi.mean();
  const double r2 = split.mu_copy - split.mu;
  const Eigen::MatrixXd r3 = split.u_copy - split.u;
  const Eigen::VectorXd r4 = split.psi_copy - split.psi;
  split.eta1 += r1;
  split.eta2 += r2;
  split.eta3 += r3;
  split.eta4 += r4;

  const double primal = std::sqrt(r1 * r1 + r2 * r2 + r3.squaredNorm() +
                                  r4.squaredNorm());
  const Eigen::MatrixXd du = split.u - u_prev;
  const Eigen::VectorXd dpsi = split.psi - psi_prev;
  const double dmu = split.mu - mu_prev;
  const double coupled = dpsi.sum() / s_count + dmu;
  const double dual = rho * std::sqrt(du.squaredNorm() + dpsi.squaredNorm() +
                                      coupled * coupled);
  split.diagnostics.primal_residuals.push_back(primal);
  split.diagnostics.dual_residuals.push_back(dual);
  split.diagnostics.iterations += 1;
}

bool check_stopping(const AdmmDiagnostics& diag, const AdmmSplit&) {
  if (diag.primal_residuals.empty() || diag.dual_residuals.empty())
    return false;
  return diag.primal_residuals.back() <= diag.eps_primal &&
         diag.dual_residuals.back() <= diag.eps_dual;
}

AdmmSolution solve_ocp_admm(const ScenarioOcp& ocp, double rho,
                            double eps_primal, double eps_dual,
                            int max_iterations) {
  AdmmSplit split = build_admm_split(ocp, rho);
  split.diagnostics.eps_primal = eps_primal;
  split.diagnostics.eps_dual = eps_dual;
  AdmmSolution out;
  out.status = SolveStatus::IterationLimit;
  for (int it = 0; it < max_iterations; ++it) {
    admm_iterate(split);
    if (check_stopping(split.diagnostics, split)) {
      out.status = SolveStatus::Converged;
      break;
    }
  }
  out.u = split.u;
  out.objective = evaluate_objective(ocp, out.u);
  out.diagnostics = split.diagnostics;
  return out;
}

namespace {

void write_matrix(std::ofstream& file, const char* tag,
                  const Eigen::MatrixXd& m) {
  file << tag << " " << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      file << m(r, c) << (c + 1 < m.cols() ? " " : "\n");
    }
    if (m.cols() == 0) file << "\n";
  }
}

Eigen::MatrixXd read_matrix(std::ifstream& file, const char* tag) {
  std::string got;
  Eigen::Index rows = 0, cols = 0;
  if (!(file >> got >> rows >> cols) || got != tag || rows < 0 || cols < 0) {
    throw SchemaMismatch(std::string("expected matrix block '") + tag + "'");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(file >> m(r, c))) {
        throw SchemaMismatch(std::string("truncated matrix block '") + tag +
                             "'");
      }
    }
  }
  return m;
}

}  // namespace

void save_ocp(const ScenarioOcp& ocp, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open problem file for writing");
  file << std::setprecision(17);
  file << "scenario-ocp\n";
  file << "horizon " << ocp.horizon << " scenarios " << ocp.scenario_count
       << " consensus " << ocp.consensus_horizon << " lambda "
       << ocp.lambda_tradeoff << "\n";
  write_matrix(file, "A", ocp.sys.A);
  write_matrix(file, "B", ocp.sys.B);
  write_matrix(file, "Cy", ocp.sys.Cy);
  write_matrix(file, "Cz", ocp.sys.Cz);
  write_matrix(file, "x0", ocp.x0);
  write_matrix(file, "u_lo", ocp.u_lo);
  write_matrix(file, "u_hi", ocp.u_hi);
  for (int i = 0; i < ocp.scenario_count; ++i) {
    write_matrix(file, "noise", ocp.noise[static_cast<std::size_t>(i)]);
  }
}

ScenarioOcp load_ocp(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw SchemaMismatch("cannot open problem file: " + path);
  std::string tag;
  if (!(file >> tag) || tag != "scenario-ocp") {
    throw SchemaMismatch("missing scenario-ocp header");
  }
  ScenarioOcp ocp;
  std::string t1, t2, t3, t4;
  if (!(file >> t1 >> ocp.horizon >> t2 >> ocp.scenario_count >> t3 >>
        ocp.consensus_horizon >> t4 >> ocp.lambda_tradeoff) ||
      t1 != "horizon" || t2 != "scenarios" || t3 != "consensus" ||
      t4 != "lambda") {
    throw SchemaMismatch("malformed problem header");
  }
  ocp.sys.A = read_matrix(file, "A");
  ocp.sys.B = read_matrix(file, "B");
  ocp.sys.Cy = read_matrix(file, "Cy");
  ocp.sys.Cz = read_matrix(file, "Cz");
  ocp.x0 = read_matrix(file, "x0");
  ocp.u_lo = read_matrix(file, "u_lo");
  ocp.u_hi = read_matrix(file, "u_hi");
  ocp.noise.clear();
  for (int i = 0; i < ocp.scenario_count; ++i) {
    ocp.noise.push_back(read_matrix(file, "noise"));
  }
  validate(ocp);
  return ocp;
}

}  // namespace peg::ocp
