#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "peg/common.hpp"

namespace peg::deep {

enum class Activation { Identity, Relu };
enum class Loss { Squared, Hinge };

struct LayeredNetwork {
  std::vector<Eigen::MatrixXd> weights;    // weights[l] maps a_l -> z_{l+1}
  std::vector<Activation> activations;     // one tag per layer

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
};

LayeredNetwork make_network(const std::vector<int>& dims,
                            const std::vector<Activation>& activations,
                            std::uint64_t seed);

void check_shapes(const LayeredNetwork& net);

Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& v);

Eigen::MatrixXd forward(const LayeredNetwork& net, const Eigen::MatrixXd& a0);

Eigen::MatrixXd update_weights(const Eigen::MatrixXd& z,
                               const Eigen::MatrixXd& a_prev);

Eigen::MatrixXd update_activations(const Eigen::MatrixXd& w_next,
                                   const Eigen::MatrixXd& z_next,
                                   const Eigen::MatrixXd& z_l,
                                   double beta_next, double gamma_l,
                                   Activation h_l);

Eigen::MatrixXd update_outputs(const Eigen::MatrixXd& a_l,
                               const Eigen::MatrixXd& w_l,
                               const Eigen::MatrixXd& a_prev, double beta_l,
                               double gamma_l, Activation h_l);

Eigen::MatrixXd update_last_outputs(Loss loss, const Eigen::MatrixXd& labels,
                                    const Eigen::MatrixXd& w_last,
                                    const Eigen::MatrixXd& a_prev,
                                    const Eigen::MatrixXd& multiplier,
                                    double beta_last);

Eigen::MatrixXd update_multiplier(const Eigen::MatrixXd& multiplier,
                                  const Eigen::MatrixXd& z_last,
                                  const Eigen::MatrixXd& w_last,
                                  const Eigen::MatrixXd& a_prev,
                                  double beta_last);

struct TrainOptions {
  Loss loss = Loss::Squared;
  std::vector<double> beta;   // one per layer; empty -> all 1.0
  std::vector<double> gamma;  // one per hidden layer; empty -> all 10.0
  int max_sweeps = 50;
  double rel_tol = 1e-6;
};

struct TrainResult {
  LayeredNetwork net;
  std::vector<double> objective_trace;
  bool nonmonotone_warning = false;
};

TrainResult train_admm(const LayeredNetwork& net, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& labels,
                       const TrainOptions& options);

int predict_direction(const LayeredNetwork& net,
                      const Eigen::VectorXd& feature_window);

void save_checkpoint(const LayeredNetwork& net, const std::string& path);
LayeredNetwork load_checkpoint(const std::string& path);

}  // namespace peg::deep
