#include "peg/deep.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace peg::deep {

namespace {

double list_value(const std::vector<double>& values, int index,
                  double fallback) {
  if (values.empty()) return fallback;
  return values.at(index);
}

double loss_value(Loss loss, const Eigen::MatrixXd& z,
                  const Eigen::MatrixXd& labels) {
  if (loss == Loss::Squared) return (z - labels).squaredNorm();
  return (1 - labels.array() * z.array()).max(0.0).sum();
}

}  // namespace

LayeredNetwork make_network(const std::vector<int>& dims,
                            const std::vector<Activation>& activations,
                            std::uint64_t seed) {
  if (dims.size() < 2) throw DimensionMismatch("need at least one layer");
  if (activations.size() != dims.size() - 1)
    throw DimensionMismatch("need one activation tag per layer");
  if (activations.back() != Activation::Identity)
    throw DimensionMismatch("final layer must be linear");
  auto rng = substream(seed, "deep-init");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  LayeredNetwork net;
  net.activations = activations;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    if (dims[l] < 1 || dims[l - 1] < 1)
      throw DimensionMismatch("layer dimensions must be positive");
    Eigen::MatrixXd w(dims[l], dims[l - 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l - 1]));
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = unit(rng) * scale;
    net.weights.push_back(w);
  }
  return net;
}

void check_shapes(const LayeredNetwork& net) {
  if (net.weights.empty()) throw DimensionMismatch("network has no layers");
  if (net.activations.size() != net.weights.size())
    throw DimensionMismatch("activation tags must match layer count");
  for (std::size_t l = 1; l < net.weights.size(); ++l) {
    if (net.weights[l].cols() != net.weights[l - 1].rows())
      throw DimensionMismatch("adjacent layer dimensions do not compose");
  }
  if (net.activations.back() != Activation::Identity)
    throw DimensionMismatch("final layer must be linear");
}

Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& v) {
  if (act == Activation::Identity) return v;
  return v.cwiseMax(0.0);
}

Eigen::MatrixXd forward(const LayeredNetwork& net, const Eigen::MatrixXd& a0) {
  check_shapes(net);
  if (a0.rows() != net.input_dim())
    throw DimensionMismatch("input batch row count must equal input dim");
  Eigen::MatrixXd a = a0;
  for (int l = 0; l < net.layer_count(); ++l)
    a = apply_activation(net.activations[l], net.weights[l] * a);
  return a;
}

Eigen::MatrixXd update_weights(const Eigen::MatrixXd& z,
                               const Eigen::MatrixXd& a_prev) {
  if (z.cols() != a_prev.cols())
    throw DimensionMismatch("batch widths must match");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(
      a_prev.transpose());
  return cod.solve(z.transpose()).transpose();
}

Eigen::MatrixXd update_activations(const Eigen::MatrixXd& w_next,
                                   const Eigen::MatrixXd& z_next,
                                   const Eigen::MatrixXd& z_l,
                                   double beta_next, double gamma_l,
                                   Activation h_l) {
  if (beta_next <= 0 || gamma_l <= 0)
    throw BoundViolation("penalty weights must be positive");
  const int dim = static_cast<int>(w_next.cols());
  const Eigen::MatrixXd lhs =
      beta_next * w_next.transpose() * w_next +
      gamma_l * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd rhs = beta_next * w_next.transpose() * z_next +
                              gamma_l * apply_activation(h_l, z_l);
  return lhs.ldlt().solve(rhs);
}

Eigen::MatrixXd update_outputs(const Eigen::MatrixXd& a_l,
                               const Eigen::MatrixXd& w_l,
                               const Eigen::MatrixXd& a_prev, double beta_l,
                               double gamma_l, Activation h_l) {
  if (beta_l <= 0 || gamma_l <= 0)
    throw BoundViolation("penalty weights must be positive");
  const Eigen::MatrixXd m = w_l * a_prev;
  if (h_l == Activation::Identity)
    return (gamma_l * a_l + beta_l * m) / (gamma_l + beta_l);
  const Eigen::ArrayXXd aa = a_l.array();
  const Eigen::ArrayXXd mm = m.array();
  const Eigen::ArrayXXd z_pos =
      ((gamma_l * aa + beta_l * mm) / (gamma_l + beta_l)).max(0.0);
  const Eigen::ArrayXXd f_pos =
      gamma_l * (aa - z_pos).square() + beta_l * (z_pos - mm).square();
  const Eigen::ArrayXXd z_neg = mm.min(0.0);
  const Eigen::ArrayXXd f_neg =
      gamma_l * aa.square() + beta_l * (z_neg - mm).square();
  return (f_pos <= f_neg).select(z_pos.matrix(), z_neg.matrix());
}

Eigen::MatrixXd update_last_outputs(Loss loss, const Eigen::MatrixXd& labels,
                                    const Eigen::MatrixXd& w_last,
                                    const Eigen::MatrixXd& a_prev,
                                    const Eigen::MatrixXd& multiplier,
                                    double beta_last) {
  if (beta_last <= 0) throw BoundViolation("penalty weights must be positive");
  const Eigen::ArrayXXd m = (w_last * a_prev).array();
  const Eigen::ArrayXXd lam = multiplier.array();
  if (loss == Loss::Squared) {
    const Eigen::ArrayXXd y = labels.array();
    return ((2 * y + 2 * beta_last * m - lam) / (2 + 2 * beta_last)).matrix();
  }
  const Eigen::ArrayXXd y = labels.array();
  Eigen::ArrayXXd z_inactive = m - lam / (2 * beta_last);
  z_inactive = (y * z_inactive >= 1).select(z_inactive, y);
  Eigen::ArrayXXd z_active = m + (y - lam) / (2 * beta_last);
  z_active = (y * z_active <= 1).select(z_active, y);
  const auto hinge = [&](const Eigen::ArrayXXd& z) {
    return lam * z + beta_last * (z - m).square() +
           (1 - y * z).max(0.0);
  };
  const Eigen::ArrayXXd f_inactive = hinge(z_inactive);
  const Eigen::ArrayXXd f_active = hinge(z_active);
  return (f_inactive <= f_active).select(z_inactive.matrix(),
                                         z_active.matrix());
}

Eigen::MatrixXd update_multiplier(const Eigen::MatrixXd& multiplier,
                                  const Eigen::MatrixXd& z_last,
                                  const Eigen::MatrixXd& w_last,
                                  const Eigen::MatrixXd& a_prev,
                                  double beta_last) {
  if (multiplier.rows() != z_last.rows() ||
      multiplier.cols() != z_last.cols())
    throw DimensionMismatch("multiplier shape must match the last layer");
  return multiplier + beta_last * (z_last - w_last * a_prev);
}

TrainResult train_admm(const LayeredNetwork& net, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& labels,
                       const TrainOptions& options) {
  check_shapes(net);
  if (inputs.cols() == 0) throw DimensionMismatch("dataset is empty");
  if (labels.cols() != inputs.cols() || labels.rows() != net.output_dim())
    throw DimensionMismatch("label batch shape mismatch");
  const int layer_count = net.layer_count();
  if (!options.beta.empty() &&
      static_cast<int>(options.beta.size()) != layer_count)
    throw DimensionMismatch("need one beta per layer");
  if (!options.gamma.empty() &&
      static_cast<int>(options.gamma.size()) != layer_count - 1)
    throw DimensionMismatch("need one gamma per hidden layer");
  for (double b : options.beta)
    if (b <= 0) throw BoundViolation("penalty weights must be positive");
  for (double gval : options.gamma)
    if (gval <= 0) throw BoundViolation("penalty weights must be positive");

  TrainResult out;
  out.net = net;
  auto& weights = out.net.weights;
  std::vector<Eigen::MatrixXd> a(layer_count + 1), z(layer_count + 1);
  a[0] = inputs;
  for (int l = 0; l < layer_count; ++l) {
    z[l + 1] = weights[l] * a[l];
    a[l + 1] = apply_activation(net.activations[l], z[l + 1]);
  }
  Eigen::MatrixXd multiplier =
      Eigen::MatrixXd::Zero(labels.rows(), labels.cols());
  const double beta_last = list_value(options.beta, layer_count - 1, 1.0);

  double previous = 0;
  bool have_previous = false;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (int l = 1; l < layer_count; ++l) {
      const double beta_l = list_value(options.beta, l - 1, 1.0);
      const double beta_next = list_value(options.beta, l, 1.0);
      const double gamma_l = list_value(options.gamma, l - 1, 10.0);
      weights[l - 1] = update_weights(z[l], a[l - 1]);
      a[l] = update_activations(weights[l], z[l + 1], z[l], beta_next, gamma_l,
                                net.activations[l - 1]);
      z[l] = update_outputs(a[l], weights[l - 1], a[l - 1], beta_l, gamma_l,
                            net.activations[l - 1]);
    }
    weights[layer_count - 1] = update_weights(
        z[layer_count] + multiplier / (2 * beta_last), a[layer_count - 1]);
    z[layer_count] =
        update_last_outputs(options.loss, labels, weights[layer_count - 1],
                            a[layer_count - 1], multiplier, beta_last);
    multiplier =
        update_multiplier(multiplier, z[layer_count], weights[layer_count - 1],
                          a[layer_count - 1], beta_last);

    double objective =
        multiplier.cwiseProduct(z[layer_count]).sum() +
        beta_last *
            (z[layer_count] - weights[layer_count - 1] * a[layer_count - 1])
                .squaredNorm() +
        loss_value(options.loss, z[layer_count], labels);
    for (int l = 1; l < layer_count; ++l) {
      const double beta_l = list_value(options.beta, l - 1, 1.0);
      const double gamma_l = list_value(options.gamma, l - 1, 10.0);
      objective += beta_l * (z[l] - weights[l - 1] * a[l - 1]).squaredNorm() +
                   gamma_l *
                       (a[l] - apply_activation(net.activations[l - 1], z[l]))
                           .squaredNorm();
    }
    if (!out.objective_trace.empty() && objective > out.objective_trace.back())
      out.nonmonotone_warning = true;
    out.objective_trace.push_back(objective);
    if (have_previous &&
        std::abs(objective - previous) <=
            options.rel_tol * std::max(1.0, std::abs(previous)))
      break;
    previous = objective;
    have_previous = true;
  }
  return out;
}

int predict_direction(const LayeredNetwork& net,
                      const Eigen::VectorXd& feature_window) {
  const Eigen::MatrixXd out = forward(net, feature_window);
  return out(0, 0) >= 0 ? 1 : -1;
}

void save_checkpoint(const LayeredNetwork& net, const std::string& path) {
  check_shapes(net);
  std::ofstream file(path);
  if (!file) throw SchemaMismatch("cannot open checkpoint for writing: " + path);
  file << std::setprecision(17);
  file << "layers " << net.layer_count() << "\n";
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weights[l];
    file << w.rows() << " " << w.cols() << " "
         << (net.activations[l] == Activation::Relu ? "relu" : "identity")
         << "\n";
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        file << w(r, c) << (c + 1 == w.cols() ? "" : " ");
      }
      file << "\n";
    }
  }
}

LayeredNetwork load_checkpoint(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw SchemaMismatch("cannot open checkpoint: " + path);
  std::string tag;
  int layer_count = 0;
  if (!(file >> tag >> layer_count) || tag != "layers" || layer_count < 1)
    throw SchemaMismatch("malformed checkpoint header");
  LayeredNetwork net;
  for (int l = 0; l < layer_count; ++l) {
    int rows = 0, cols = 0;
    std::string act;
    if (!(file >> rows >> cols >> act) || rows < 1 || cols < 1)
      throw SchemaMismatch("malformed checkpoint layer header");
    if (act != "relu" && act != "identity")
      throw SchemaMismatch("unknown activation tag: " + act);
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        if (!(file >> w(r, c)))
          throw SchemaMismatch("truncated checkpoint matrix");
    net.weights.push_back(w);
    net.activations.push_back(act == "relu" ? Activation::Relu
                                            : Activation::Identity);
  }
  check_shapes(net);
  return net;
}

}  // namespace peg::deep
