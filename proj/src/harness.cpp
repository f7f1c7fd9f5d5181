#include "peg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

#include "peg/auction.hpp"
#include "peg/consensus.hpp"
#include "peg/deep.hpp"
#include "peg/ocp.hpp"
#include "peg/secure.hpp"

namespace peg::harness {

namespace {

constexpr const char* kCsvHeader =
    "epoch,price,s_max,s_outstanding,block_reward,auction_issuance,"
    "collateral_ratio,mpc_objective,auction_payments,consensus_iterations,"
    "verification";

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool to_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool to_int(const std::string& s, int& out) {
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool to_u64(const std::string& s, std::uint64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoull(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool to_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void finalize_summary(RunArtifacts& a) {
  a.price_variance = 0;
  a.peg_deviation = 0;
  if (a.rows.empty()) return;
  double mean = 0;
  for (const auto& r : a.rows) mean += r.price;
  mean /= static_cast<double>(a.rows.size());
  double var = 0, dev = 0;
  for (const auto& r : a.rows) {
    var += (r.price - mean) * (r.price - mean);
    dev += std::abs(r.price - 1.0);
  }
  a.price_variance = var / static_cast<double>(a.rows.size());
  a.peg_deviation = dev / static_cast<double>(a.rows.size());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

deep::LayeredNetwork train_price_predictor(const ExperimentConfig& cfg) {
  auto rng = substream(cfg.seed, "predictor-warmup");
  std::normal_distribution<double> gauss(0.0, 1.0);
  econ::PricePath path;
  path.mu = cfg.gbm_mu;
  path.sigma = cfg.gbm_sigma;
  path.dt = cfg.gbm_dt;
  path.prices.push_back(1.0);
  for (int t = 0; t < cfg.predictor_warmup; ++t) {
    path.prices.push_back(econ::gbm_step(path.prices.back(), cfg.gbm_mu,
                                         cfg.gbm_sigma, cfg.gbm_dt,
                                         gauss(rng)));
  }
  const std::vector<double> diffs = path.first_differences();
  const int k = cfg.predictor_window;
  const int rows = static_cast<int>(diffs.size()) - k;
  Eigen::MatrixXd x(k + 1, rows);
  Eigen::MatrixXd y(1, rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < k; ++j) x(j, i) = diffs[i + j];
    x(k, i) = 1.0;
    y(0, i) = diffs[i + k] >= 0 ? 1.0 : -1.0;
  }
  deep::LayeredNetwork net = deep::make_network(
      {k + 1, 1}, {deep::Activation::Identity}, cfg.seed);
  deep::TrainOptions opt;
  opt.loss = deep::Loss::Hinge;
  opt.max_sweeps = cfg.predictor_sweeps;
  return deep::train_admm(net, x, y, opt).net;
}

struct EpochContext {
  int epoch = 0;
  const char* phase = "setup";
};

[[noreturn]] void rethrow_with_context(const EpochContext& ctx) {
  const std::string where =
      "epoch " + std::to_string(ctx.epoch) + " [" + ctx.phase + "]: ";
  try {
    throw;
  } catch (const IterationLimitError& e) {
    throw IterationLimitError(where + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(where + e.what());
  }
}

RunArtifacts run_supply_model(const ExperimentConfig& cfg) {
  const bool collateralised = cfg.model == ModelKind::Collateralised;
  const bool controlled = !cfg.baseline;
  const double br0 = cfg.br0_frac * cfg.supply0;
  const double auc0 = cfg.auc0_frac * cfg.supply0;

  auto xi_rng = substream(cfg.seed, "gbm");
  std::normal_distribution<double> gauss(0.0, 1.0);

  econ::SupplyState state = econ::make_supply_state(
      cfg.headroom * cfg.supply0, cfg.supply0,
      collateralised ? cfg.lambda0 : 1.0, cfg.cap_mult * br0,
      cfg.cap_mult * auc0, cfg.lambda_max);
  state.s_initial = 0;

  std::optional<deep::LayeredNetwork> predictor;
  if (controlled) predictor = train_price_predictor(cfg);

  int users = cfg.auction_users;
  auction::ValuationModel vals;
  vals.user_slot.assign(
      users, {auction::QuadraticValuation{0.0, cfg.auction_value_slope,
                                          cfg.auction_value_curvature}});
  vals.cost = {auction::SlotCost{cfg.auction_cost_k0, cfg.auction_cost_k2}};
  consensus::NetworkModel net;
  if (cfg.net_alpha.size() == users) {
    net.alpha = cfg.net_alpha;
  } else {
    net.alpha = Eigen::VectorXd::Ones(users);
  }
  net.p_e = cfg.net_p_e;

  RunArtifacts out;
  double price = 1.0;
  double price_prev = 1.0;
  double br_level = br0;
  double auc_level = auc0;
  std::vector<double> window;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochContext ctx{epoch, "setup"};
    try {
      EpochRow row;
      row.epoch = epoch;
      row.price = price;

      double net_flow = 0;
      double u0 = 0;
      if (controlled) {
        ctx.phase = "controls";
        econ::AdjustedControls adj =
            econ::adjust_controls(state, br_level, auc_level, price,
                                  price_prev);
        state.s_max = adj.s_max;
        state.s_unissued = adj.s_max - state.s_outstanding;
        state.collateral_ratio = collateralised ? adj.collateral_ratio : 1.0;
        state.reserve = state.collateral_ratio * state.s_outstanding;
        econ::check_invariants(state);
        br_level = adj.br;
        auc_level = adj.auc;

        ctx.phase = "predictor";
        Eigen::VectorXd features =
            Eigen::VectorXd::Zero(cfg.predictor_window + 1);
        for (int j = 0; j < cfg.predictor_window; ++j) {
          const int idx = static_cast<int>(window.size()) -
                          cfg.predictor_window + j;
          if (idx >= 0) features(j) = window[static_cast<std::size_t>(idx)];
        }
        features(cfg.predictor_window) = 1.0;
        const int direction = deep::predict_direction(*predictor, features);

        ctx.phase = "mpc";
        const double cap_dn =
            collateralised
                ? cfg.buyback_gain *
                      std::max(0.0,
                               state.collateral_ratio - cfg.lambda_target) *
                      state.s_outstanding
                : 0.0;
        ocp::ScenarioOcp prob;
        prob.sys.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
        prob.sys.B =
            Eigen::MatrixXd::Constant(1, 1, cfg.impact_depth / cfg.supply0);
        prob.sys.Cy = Eigen::MatrixXd::Identity(1, 1);
        prob.sys.Cz = Eigen::MatrixXd::Identity(1, 1);
        prob.x0 = Eigen::VectorXd::Constant(1, 1.0 / price - 1.0);
        prob.horizon = cfg.mpc_horizon;
        prob.scenario_count = cfg.mpc_scenarios;
        prob.lambda_tradeoff = cfg.mpc_lambda;
        prob.consensus_horizon = cfg.mpc_horizon;
        prob.u_lo = Eigen::VectorXd::Constant(cfg.mpc_horizon, -cap_dn);
        prob.u_hi = Eigen::VectorXd::Zero(cfg.mpc_horizon);
        auto noise_rng =
            substream(cfg.seed, "ocp-noise-" + std::to_string(epoch));
        const double drift = -direction * cfg.gbm_sigma * 0.5;
        prob.noise.assign(cfg.mpc_scenarios,
                          Eigen::MatrixXd::Zero(cfg.mpc_horizon, 1));
        for (int s = 0; s < cfg.mpc_scenarios; ++s) {
          for (int t = 0; t < cfg.mpc_horizon; ++t) {
            prob.noise[s](t, 0) =
                drift + cfg.gbm_sigma * std::sqrt(cfg.gbm_dt) *
                            gauss(noise_rng);
          }
        }
        ocp::AdmmSolution sol = ocp::solve_ocp_admm(
            prob, cfg.mpc_rho, cfg.mpc_eps, cfg.mpc_eps, cfg.mpc_max_iters);
        u0 = std::clamp(sol.u(0, 0), -cap_dn, 0.0);
        row.mpc_objective = sol.objective;

        ctx.phase = "buyback";
        const double burn =
            std::min(-u0, std::max(0.0, state.s_outstanding - 1.0));
        state.s_outstanding -= burn;
        state.s_unissued += burn;
        state.reserve = state.collateral_ratio * state.s_outstanding;
        econ::check_invariants(state);

        ctx.phase = "block-reward";
        const double br_eff =
            std::min(br_level, std::max(0.0, state.s_unissued));
        state = econ::step_block_reward(state, br_eff);
        row.block_reward = br_eff;

        ctx.phase = "auction";
        const double auc_room =
            std::min(auc_level, std::max(0.0, state.s_unissued));
        std::vector<auction::DemandReport> reports(users);
        for (int i = 0; i < users; ++i) {
          reports[i].user = i;
          reports[i].x_min = Eigen::VectorXd::Zero(1);
          reports[i].x = Eigen::VectorXd::Constant(1, auc_room / users);
          reports[i].x_max = Eigen::VectorXd::Constant(1, cfg.auction_user_cap);
        }
        auction::AuctionConstraints cons;
        cons.y_lo = Eigen::VectorXd::Zero(1);
        cons.y_hi = Eigen::VectorXd::Constant(1, auc_room);
        auction::AuctionOutcome outcome;
        if (cfg.secure_enabled) {
          net.seed = substream(cfg.seed, "net-" + std::to_string(epoch))();
          secure::CommittedRunOptions opts;
          opts.seed = net.seed;
          opts.q = cfg.consensus_q;
          opts.sigma = cfg.consensus_sigma;
          opts.eps1 = cfg.consensus_eps;
          opts.eps2 = cfg.consensus_eps;
          opts.max_iterations = cfg.consensus_max_iters;
          secure::CommittedRunResult res =
              secure::committed_protocol_run(reports, vals, cons, net, opts);
          outcome = res.outcome;
          row.consensus_iterations = res.diagnostics.iterations;
          if (res.report.clean()) {
            row.verification = "ok";
          } else if (!res.report.deviations.empty()) {
            row.verification =
                "deviation:" + std::to_string(res.report.deviations[0].node) +
                "@" + std::to_string(res.report.deviations[0].round);
          } else {
            row.verification = "commitment-mismatch";
          }
        } else if (cfg.consensus_enabled) {
          net.seed = substream(cfg.seed, "net-" + std::to_string(epoch))();
          consensus::ProtocolResult res = consensus::run_protocol_one(
              reports, vals, cons, net, cfg.consensus_q, cfg.consensus_sigma,
              cfg.consensus_eps, cfg.consensus_eps, cfg.consensus_max_iters);
          outcome = res.outcome;
          row.consensus_iterations = res.diagnostics.iterations;
        } else {
          outcome = auction::run_auction(reports, vals, cons);
        }
        const double issued = outcome.issuance(0);
        std::vector<double> bids(users);
        for (int i = 0; i < users; ++i) bids[i] = outcome.allocation(i, 0);
        row.auction_payments = outcome.payments.sum();

        ctx.phase = "issuance";
        state = econ::apply_auction_issuance(state, issued, bids);
        row.auction_issuance = issued;

        net_flow = (br_eff - br0) + (issued - auc0) + u0;
      }

      row.s_max = state.s_max;
      row.s_outstanding = state.s_outstanding;
      row.collateral_ratio = state.collateral_ratio;
      out.rows.push_back(row);

      ctx.phase = "price";
      const double grown = econ::gbm_step(price, cfg.gbm_mu, cfg.gbm_sigma,
                                          cfg.gbm_dt, gauss(xi_rng));
      double next = grown;
      if (controlled) {
        next = std::max(
            grown * (1.0 - cfg.impact_depth * net_flow / cfg.supply0), 1e-9);
      }
      window.push_back(next - price);
      price_prev = price;
      price = next;
      state.t = epoch + 1;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::runtime_error&) {
      rethrow_with_context(ctx);
    }
  }
  finalize_summary(out);
  return out;
}

RunArtifacts run_taylor_model(const ExperimentConfig& cfg) {
  auto rng = substream(cfg.seed, "taylor-noise");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const econ::TaylorParams& p = cfg.taylor;
  Eigen::Matrix2d a;
  a << p.rho, p.zeta, p.alpha, 1.0;
  const Eigen::Vector2d b(-p.zeta, 0.0);

  RunArtifacts out;
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochContext ctx{epoch, "taylor-mpc"};
    try {
      double u = 0;
      if (!cfg.baseline) {
        Eigen::VectorXd plan = econ::taylor_mpc_solve(p, x);
        u = plan(0);
      }
      EpochRow row;
      row.epoch = epoch;
      row.price = 1.0 + x(1);
      row.s_max = cfg.headroom * cfg.supply0;
      row.s_outstanding = cfg.supply0;
      row.mpc_objective = (1.0 - p.lambda_weight) * x(0) * x(0) +
                          p.lambda_weight * x(1) * x(1) + 0.1 * u * u;
      out.rows.push_back(row);

      ctx.phase = "taylor-step";
      Eigen::Vector2d noise(cfg.gbm_sigma * gauss(rng),
                            cfg.gbm_sigma * gauss(rng));
      x = a * x + b * u + noise;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::runtime_error&) {
      rethrow_with_context(ctx);
    }
  }
  finalize_summary(out);
  return out;
}

}  // namespace

std::string model_name(ModelKind model) {
  switch (model) {
    case ModelKind::Algorithmic:
      return "algorithmic";
    case ModelKind::Collateralised:
      return "collateralised";
    case ModelKind::Taylor:
      return "taylor";
  }
  return "collateralised";
}

ModelKind parse_model(const std::string& name) {
  if (name == "algorithmic") return ModelKind::Algorithmic;
  if (name == "collateralised" || name == "collateralized") {
    return ModelKind::Collateralised;
  }
  if (name == "taylor") return ModelKind::Taylor;
  throw ConfigError({"model: expected algorithmic|collateralised|taylor, got '" +
                     name + "'"});
}

econ::TaylorParams ExperimentConfig::default_taylor_params() {
  econ::TaylorParams p;
  p.alpha = 0.1;
  p.rho = 0.8;
  p.zeta = 0.3;
  p.phi_y = 0.5;
  p.phi_pi = 1.5;
  p.i_star = 0.02;
  p.pi_star = 0.02;
  p.r_star = 0.0;
  p.beta_discount = 0.95;
  p.lambda_weight = 0.5;
  p.horizon = 8;
  p.allow_negative_rates = true;
  return p;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::map<std::string, std::string> entries;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) +
                       ": expected key = value");
      continue;
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (entries.count(key)) {
      errors.push_back("duplicate key '" + key + "'");
      continue;
    }
    entries[key] = value;
  }

  auto take_double = [&](const char* key, double& slot) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    if (!to_double(it->second, slot)) {
      errors.push_back(std::string(key) + ": expected a number, got '" +
                       it->second + "'");
    }
    entries.erase(it);
  };
  auto take_int = [&](const char* key, int& slot) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    if (!to_int(it->second, slot)) {
      errors.push_back(std::string(key) + ": expected an integer, got '" +
                       it->second + "'");
    }
    entries.erase(it);
  };
  auto take_bool = [&](const char* key, bool& slot) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    if (!to_bool(it->second, slot)) {
      errors.push_back(std::string(key) + ": expected true|false, got '" +
                       it->second + "'");
    }
    entries.erase(it);
  };

  if (auto it = entries.find("seed"); it != entries.end()) {
    if (!to_u64(it->second, cfg.seed)) {
      errors.push_back("seed: expected an unsigned integer, got '" +
                       it->second + "'");
    }
    entries.erase(it);
  }
  if (auto it = entries.find("model"); it != entries.end()) {
    try {
      cfg.model = parse_model(it->second);
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.field_errors.begin(),
                    e.field_errors.end());
    }
    entries.erase(it);
  }
  if (auto it = entries.find("out_dir"); it != entries.end()) {
    cfg.out_dir = it->second;
    entries.erase(it);
  }
  if (auto it = entries.find("net_alpha"); it != entries.end()) {
    std::vector<double> vals;
    bool ok = true;
    for (const std::string& part : split(it->second, ',')) {
      double v = 0;
      if (!to_double(trim(part), v)) {
        ok = false;
        break;
      }
      vals.push_back(v);
    }
    if (!ok) {
      errors.push_back("net_alpha: expected comma-separated numbers, got '" +
                       it->second + "'");
    } else {
      cfg.net_alpha = Eigen::Map<Eigen::VectorXd>(
          vals.data(), static_cast<Eigen::Index>(vals.size()));
    }
    entries.erase(it);
  }

  take_int("epochs", cfg.epochs);
  take_bool("baseline", cfg.baseline);
  take_int("threads", cfg.threads);
  take_double("gbm_mu", cfg.gbm_mu);
  take_double("gbm_sigma", cfg.gbm_sigma);
  take_double("gbm_dt", cfg.gbm_dt);
  take_double("supply0", cfg.supply0);
  take_double("headroom", cfg.headroom);
  take_double("br0_frac", cfg.br0_frac);
  take_double("auc0_frac", cfg.auc0_frac);
  take_double("cap_mult", cfg.cap_mult);
  take_double("lambda0", cfg.lambda0);
  take_double("lambda_target", cfg.lambda_target);
  take_double("lambda_max", cfg.lambda_max);
  take_double("buyback_gain", cfg.buyback_gain);
  take_double("impact_depth", cfg.impact_depth);
  take_int("mpc_horizon", cfg.mpc_horizon);
  take_int("mpc_scenarios", cfg.mpc_scenarios);
  take_double("mpc_lambda", cfg.mpc_lambda);
  take_double("mpc_rho", cfg.mpc_rho);
  take_double("mpc_eps", cfg.mpc_eps);
  take_int("mpc_max_iters", cfg.mpc_max_iters);
  take_int("predictor_window", cfg.predictor_window);
  take_int("predictor_warmup", cfg.predictor_warmup);
  take_int("predictor_sweeps", cfg.predictor_sweeps);
  take_int("auction_users", cfg.auction_users);
  take_double("auction_value_slope", cfg.auction_value_slope);
  take_double("auction_value_curvature", cfg.auction_value_curvature);
  take_double("auction_cost_k0", cfg.auction_cost_k0);
  take_double("auction_cost_k2", cfg.auction_cost_k2);
  take_double("auction_user_cap", cfg.auction_user_cap);
  take_bool("consensus_enabled", cfg.consensus_enabled);
  take_bool("secure_enabled", cfg.secure_enabled);
  take_double("net_p_e", cfg.net_p_e);
  take_double("consensus_q", cfg.consensus_q);
  take_double("consensus_sigma", cfg.consensus_sigma);
  take_double("consensus_eps", cfg.consensus_eps);
  take_int("consensus_max_iters", cfg.consensus_max_iters);
  take_double("taylor_alpha", cfg.taylor.alpha);
  take_double("taylor_rho", cfg.taylor.rho);
  take_double("taylor_zeta", cfg.taylor.zeta);
  take_double("taylor_phi_y", cfg.taylor.phi_y);
  take_double("taylor_phi_pi", cfg.taylor.phi_pi);
  take_double("taylor_i_star", cfg.taylor.i_star);
  take_double("taylor_pi_star", cfg.taylor.pi_star);
  take_double("taylor_r_star", cfg.taylor.r_star);
  take_double("taylor_beta", cfg.taylor.beta_discount);
  take_double("taylor_lambda_weight", cfg.taylor.lambda_weight);
  take_int("taylor_horizon", cfg.taylor.horizon);
  take_bool("taylor_allow_negative", cfg.taylor.allow_negative_rates);

  for (const auto& [key, value] : entries) {
    errors.push_back("unknown key '" + key + "'");
  }
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(buf.str());
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  require(cfg.epochs >= 0, "epochs: must be >= 0");
  require(cfg.threads >= 1, "threads: must be >= 1");
  require(cfg.gbm_sigma >= 0, "gbm_sigma: must be >= 0");
  require(cfg.gbm_dt > 0, "gbm_dt: must be > 0");
  require(cfg.supply0 > 0, "supply0: must be > 0");
  require(cfg.headroom >= 1, "headroom: must be >= 1");
  require(cfg.br0_frac >= 0, "br0_frac: must be >= 0");
  require(cfg.auc0_frac >= 0, "auc0_frac: must be >= 0");
  require(cfg.cap_mult >= 1, "cap_mult: must be >= 1");
  require(cfg.lambda_max >= 1, "lambda_max: must be >= 1");
  require(cfg.lambda0 >= 1 && cfg.lambda0 <= cfg.lambda_max,
          "lambda0: must lie in [1, lambda_max]");
  require(cfg.lambda_target >= 1 && cfg.lambda_target <= cfg.lambda_max,
          "lambda_target: must lie in [1, lambda_max]");
  require(cfg.buyback_gain >= 0, "buyback_gain: must be >= 0");
  require(cfg.mpc_horizon >= 1, "mpc_horizon: must be >= 1");
  require(cfg.mpc_scenarios >= 2, "mpc_scenarios: must be >= 2");
  require(cfg.mpc_lambda >= 0 && cfg.mpc_lambda <= 1,
          "mpc_lambda: must lie in [0, 1]");
  require(cfg.mpc_rho > 0, "mpc_rho: must be > 0");
  require(cfg.mpc_eps > 0, "mpc_eps: must be > 0");
  require(cfg.mpc_max_iters >= 1, "mpc_max_iters: must be >= 1");
  require(cfg.predictor_window >= 1, "predictor_window: must be >= 1");
  require(cfg.predictor_warmup > cfg.predictor_window + 1,
          "predictor_warmup: must exceed predictor_window + 1");
  require(cfg.predictor_sweeps >= 1, "predictor_sweeps: must be >= 1");
  require(cfg.auction_users >= 1, "auction_users: must be >= 1");
  require(cfg.auction_value_slope >= 0, "auction_value_slope: must be >= 0");
  require(cfg.auction_value_curvature >= 0,
          "auction_value_curvature: must be >= 0");
  require(cfg.auction_cost_k0 >= 0, "auction_cost_k0: must be >= 0");
  require(cfg.auction_cost_k2 >= 0, "auction_cost_k2: must be >= 0");
  require(cfg.auction_user_cap > 0, "auction_user_cap: must be > 0");
  require(cfg.net_p_e >= 0 && cfg.net_p_e <= 1,
          "net_p_e: must lie in [0, 1]");
  if (cfg.net_alpha.size() > 0) {
    require(cfg.net_alpha.size() == cfg.auction_users,
            "net_alpha: needs one entry per auction user");
    for (Eigen::Index i = 0; i < cfg.net_alpha.size(); ++i) {
      if (cfg.net_alpha(i) <= 0 || cfg.net_alpha(i) > 1) {
        errors.push_back("net_alpha: entries must lie in (0, 1]");
        break;
      }
    }
  }
  require(cfg.consensus_q > 0, "consensus_q: must be > 0");
  require(cfg.consensus_sigma > 0, "consensus_sigma: must be > 0");
  require(cfg.consensus_eps > 0, "consensus_eps: must be > 0");
  require(cfg.consensus_max_iters >= 1, "consensus_max_iters: must be >= 1");
  require(cfg.taylor.beta_discount > 0 && cfg.taylor.beta_discount < 1,
          "taylor_beta: must lie in (0, 1)");
  require(cfg.taylor.lambda_weight >= 0 && cfg.taylor.lambda_weight <= 1,
          "taylor_lambda_weight: must lie in [0, 1]");
  require(cfg.taylor.horizon >= 1, "taylor_horizon: must be >= 1");
  require(cfg.taylor.i_star >= 0, "taylor_i_star: must be >= 0");
  if (!errors.empty()) throw ConfigError(errors);
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  if (config.model == ModelKind::Taylor) return run_taylor_model(config);
  return run_supply_model(config);
}

std::string artifacts_to_csv(const RunArtifacts& artifacts) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : artifacts.rows) {
    out += std::to_string(r.epoch);
    out += ',' + fmt(r.price);
    out += ',' + fmt(r.s_max);
    out += ',' + fmt(r.s_outstanding);
    out += ',' + fmt(r.block_reward);
    out += ',' + fmt(r.auction_issuance);
    out += ',' + fmt(r.collateral_ratio);
    out += ',' + fmt(r.mpc_objective);
    out += ',' + fmt(r.auction_payments);
    out += ',' + std::to_string(r.consensus_iterations);
    out += ',' + r.verification;
    out += '\n';
  }
  return out;
}

void save_artifacts_csv(const RunArtifacts& artifacts,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << artifacts_to_csv(artifacts);
}

RunArtifacts load_artifacts_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw SchemaMismatch("unexpected run artifact header in '" + path + "'");
  }
  RunArtifacts out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const std::vector<std::string> parts = split(trim(line), ',');
    if (parts.size() != 11) {
      throw SchemaMismatch("expected 11 columns, got " +
                           std::to_string(parts.size()));
    }
    EpochRow r;
    int iters = 0;
    bool ok = to_int(parts[0], r.epoch) && to_double(parts[1], r.price) &&
              to_double(parts[2], r.s_max) &&
              to_double(parts[3], r.s_outstanding) &&
              to_double(parts[4], r.block_reward) &&
              to_double(parts[5], r.auction_issuance) &&
              to_double(parts[6], r.collateral_ratio) &&
              to_double(parts[7], r.mpc_objective) &&
              to_double(parts[8], r.auction_payments) &&
              to_int(parts[9], iters);
    if (!ok) throw SchemaMismatch("malformed run artifact row");
    r.consensus_iterations = iters;
    r.verification = parts[10];
    out.rows.push_back(r);
  }
  finalize_summary(out);
  return out;
}

CompareSummary compare_runs(const RunArtifacts& a, const RunArtifacts& b) {
  if (a.rows.size() != b.rows.size()) {
    throw SchemaMismatch("runs cover different epoch counts: " +
                         std::to_string(a.rows.size()) + " vs " +
                         std::to_string(b.rows.size()));
  }
  auto ratio_of = [](double x, double y) {
    if (y == 0) return x == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    return x / y;
  };
  auto mean_of = [](const RunArtifacts& r, double EpochRow::*field) {
    if (r.rows.empty()) return 0.0;
    double total = 0;
    for (const auto& row : r.rows) total += row.*field;
    return total / static_cast<double>(r.rows.size());
  };
  CompareSummary out;
  out.epochs = static_cast<int>(a.rows.size());
  auto push = [&](const std::string& name, double x, double y) {
    out.metrics.push_back({name, x, y, x - y, ratio_of(x, y)});
  };
  push("price_variance", a.price_variance, b.price_variance);
  push("peg_deviation", a.peg_deviation, b.peg_deviation);
  push("mean_price", mean_of(a, &EpochRow::price),
       mean_of(b, &EpochRow::price));
  push("mean_auction_payments", mean_of(a, &EpochRow::auction_payments),
       mean_of(b, &EpochRow::auction_payments));
  return out;
}

std::string compare_to_text(const CompareSummary& summary) {
  std::string out = "metric,a,b,delta,ratio\n";
  for (const auto& m : summary.metrics) {
    out += m.metric + ',' + fmt(m.a) + ',' + fmt(m.b) + ',' + fmt(m.delta) +
           ',' + fmt(m.ratio) + '\n';
  }
  return out;
}

std::string stability_region_csv(const econ::TaylorParams& base, int grid,
                                 double phi_y_max, double phi_pi_max,
                                 int threads) {
  if (grid < 1) throw DimensionMismatch("grid must be >= 1");
  auto value_at = [&](int i, int cells) {
    return cells <= 1 ? 0.0 : static_cast<double>(i) / (cells - 1);
  };
  auto render_rows = [&](int lo, int hi) {
    std::string chunk;
    for (int i = lo; i < hi; ++i) {
      for (int j = 0; j < grid; ++j) {
        econ::TaylorParams p = base;
        p.phi_y = value_at(i, grid) * phi_y_max;
        p.phi_pi = value_at(j, grid) * phi_pi_max;
        chunk += fmt(p.phi_y) + ',' + fmt(p.phi_pi) + ',' +
                 (econ::is_closed_loop_stable(p) ? "1" : "0") + '\n';
      }
    }
    return chunk;
  };
  std::string out = "phi_y,phi_pi,stable\n";
  const int workers = std::max(1, std::min(threads, grid));
  if (workers == 1) {
    out += render_rows(0, grid);
    return out;
  }
  std::vector<std::future<std::string>> chunks;
  const int step = (grid + workers - 1) / workers;
  for (int lo = 0; lo < grid; lo += step) {
    const int hi = std::min(grid, lo + step);
    chunks.push_back(
        std::async(std::launch::async, [=]() { return render_rows(lo, hi); }));
  }
  for (auto& c : chunks) out += c.get();
  return out;
}

ProbeSummary auction_probe(std::uint64_t seed, int instances,
                           int grid_points) {
  auto rng = substream(seed, "auction-probe");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> user_count(2, 4);
  std::uniform_int_distribution<int> slot_count(1, 2);

  ProbeSummary out;
  out.csv = "instance,user,max_gain,budget_slack\n";
  out.min_budget_slack = std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < instances; ++inst) {
    const int users = user_count(rng);
    const int slots = slot_count(rng);
    std::vector<auction::DemandReport> reports(users);
    auction::ValuationModel vals;
    vals.user_slot.assign(users, {});
    auction::AuctionConstraints cons;
    for (int i = 0; i < users; ++i) {
      reports[i].user = i;
      reports[i].x_min = Eigen::VectorXd::Zero(slots);
      reports[i].x = Eigen::VectorXd::Zero(slots);
      reports[i].x_max = Eigen::VectorXd::Zero(slots);
      for (int t = 0; t < slots; ++t) {
        auction::QuadraticValuation v;
        v.a = 0;
        v.b = 1.0 + 4.0 * unit(rng);
        v.c = 0.2 + 0.8 * unit(rng);
        vals.user_slot[i].push_back(v);
        const double x_max = 1.0 + 3.0 * unit(rng);
        reports[i].x(t) = x_max * unit(rng);
        reports[i].x_max(t) = x_max;
      }
    }
    cons.y_lo = Eigen::VectorXd::Zero(slots);
    cons.y_hi = Eigen::VectorXd::Zero(slots);
    for (int t = 0; t < slots; ++t) {
      auction::SlotCost c;
      c.k0 = 0.5 * unit(rng);
      c.k2 = 0.1 + 0.5 * unit(rng);
      vals.cost.push_back(c);
      double slot_cap = 0;
      for (int i = 0; i < users; ++i) slot_cap += reports[i].x_max(t);
      cons.y_hi(t) = 0.8 * slot_cap;
    }

    auction::AuctionOutcome truthful =
        auction::run_auction(reports, vals, cons);
    double cost_total = 0;
    for (int t = 0; t < slots; ++t) {
      cost_total += vals.cost[t].value(truthful.issuance(t));
    }
    const double slack = truthful.payments.sum() - cost_total;
    out.min_budget_slack = std::min(out.min_budget_slack, slack);

    std::vector<double> offsets;
    for (int g = 0; g < grid_points; ++g) {
      const double frac =
          grid_points <= 1 ? 0.0
                           : static_cast<double>(g) / (grid_points - 1);
      offsets.push_back(-2.0 + 4.0 * frac);
    }
    for (int i = 0; i < users; ++i) {
      const double gain = auction::strategyproofness_probe(
          reports, vals, cons, i, offsets, offsets);
      out.max_gain = std::max(out.max_gain, gain);
      out.csv += std::to_string(inst) + ',' + std::to_string(i) + ',' +
                 fmt(gain) + ',' + fmt(slack) + '\n';
    }
  }
  if (instances == 0) out.min_budget_slack = 0;
  out.instances = instances;
  return out;
}

}  // namespace peg::harness
