#pragma once

#include <Eigen/Dense>

#include "ringdrive/ppo/rng.hpp"

namespace ringdrive::ppo {

// Shared-trunk actor-critic: input -> ReLU(N_H) -> ReLU(N_H) -> linear(L+1).
// Output row 0 is the value V(s), rows 1..L are the Gaussian means. A single
// trainable log sigma is shared by all action components.
//
// All parameters live in one flat vector (W1, b1, W2, b2, W3, b3, log sigma)
// so optimizers and checkpoints treat them uniformly.
class PolicyValueNet {
 public:
  PolicyValueNet() = default;
  PolicyValueNet(int inputs, int hidden, int sites, double sigma_init, Rng& rng);

  int inputs() const { return inputs_; }
  int hidden() const { return hidden_; }
  int sites() const { return sites_; }
  int outputs() const { return sites_ + 1; }
  Eigen::Index parameter_count() const { return params_.size(); }

  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }

  double log_sigma() const { return params_(params_.size() - 1); }
  double sigma() const { return std::exp(log_sigma()); }

  struct Activations {
    Eigen::MatrixXd input;
    Eigen::MatrixXd z1, h1, z2, h2;
    Eigen::MatrixXd output;  // (L+1) x batch
  };

  // Column-per-sample forward pass.
  Activations forward(const Eigen::MatrixXd& obs) const;
  Eigen::MatrixXd output(const Eigen::MatrixXd& obs) const { return forward(obs).output; }

  // Gradient of a scalar loss w.r.t. all weights given dLoss/dOutput.
  // The log sigma slot is left at zero for the caller to fill.
  Eigen::VectorXd backward(const Activations& act, const Eigen::MatrixXd& d_output) const;

 private:
  struct Layout {
    Eigen::Index w1, b1, w2, b2, w3, b3, log_sigma, total;
  };
  Layout layout() const;

  int inputs_ = 0;
  int hidden_ = 0;
  int sites_ = 0;
  Eigen::VectorXd params_;
};

}  // namespace ringdrive::ppo
