#include "ringdrive/ppo/network.hpp"

#include <cmath>

#include "ringdrive/errors.hpp"

namespace ringdrive::ppo {

namespace {

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace

PolicyValueNet::Layout PolicyValueNet::layout() const {
  Layout l{};
  const Eigen::Index in = inputs_, h = hidden_, out = sites_ + 1;
  l.w1 = 0;
  l.b1 = l.w1 + h * in;
  l.w2 = l.b1 + h;
  l.b2 = l.w2 + h * h;
  l.w3 = l.b2 + h;
  l.b3 = l.w3 + out * h;
  l.log_sigma = l.b3 + out;
  l.total = l.log_sigma + 1;
  return l;
}

PolicyValueNet::PolicyValueNet(int inputs, int hidden, int sites,
                               double sigma_init, Rng& rng)
    : inputs_(inputs), hidden_(hidden), sites_(sites) {
  if (inputs < 1 || hidden < 1 || sites < 1)
    throw InvalidArg("network dimensions must be positive");
  if (!(sigma_init > 0.0)) throw InvalidArg("initial sigma must be positive");
  const Layout l = layout();
  params_ = Eigen::VectorXd::Zero(l.total);

  auto fill_uniform = [&](Eigen::Index offset, Eigen::Index count, double limit) {
    for (Eigen::Index i = 0; i < count; ++i)
      params_(offset + i) = limit * (2.0 * rng.uniform() - 1.0);
  };
  // He-uniform trunk, small output layer so initial means start near zero
  fill_uniform(l.w1, l.b1 - l.w1, std::sqrt(6.0 / inputs));
  fill_uniform(l.w2, l.b2 - l.w2, std::sqrt(6.0 / hidden));
  fill_uniform(l.w3, l.b3 - l.w3, 0.1 * std::sqrt(6.0 / (hidden + sites + 1)));
  params_.segment(l.b1, hidden).setConstant(0.01);
  params_.segment(l.b2, hidden).setConstant(0.01);
  params_(l.log_sigma) = std::log(sigma_init);
}

PolicyValueNet::Activations PolicyValueNet::forward(const Eigen::MatrixXd& obs) const {
  if (obs.rows() != inputs_) throw InvalidArg("observation size does not match network");
  const Layout l = layout();
  const double* p = params_.data();
  const ConstMap w1(p + l.w1, hidden_, inputs_);
  const ConstVecMap b1(p + l.b1, hidden_);
  const ConstMap w2(p + l.w2, hidden_, hidden_);
  const ConstVecMap b2(p + l.b2, hidden_);
  const ConstMap w3(p + l.w3, sites_ + 1, hidden_);
  const ConstVecMap b3(p + l.b3, sites_ + 1);

  Activations a;
  a.input = obs;
  a.z1 = (w1 * obs).colwise() + b1;
  a.h1 = a.z1.cwiseMax(0.0);
  a.z2 = (w2 * a.h1).colwise() + b2;
  a.h2 = a.z2.cwiseMax(0.0);
  a.output = (w3 * a.h2).colwise() + b3;
  return a;
}

Eigen::VectorXd PolicyValueNet::backward(const Activations& a,
                                         const Eigen::MatrixXd& d_output) const {
  const Layout l = layout();
  const double* p = params_.data();
  const ConstMap w2(p + l.w2, hidden_, hidden_);
  const ConstMap w3(p + l.w3, sites_ + 1, hidden_);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(l.total);
  double* g = grad.data();
  Map(g + l.w3, sites_ + 1, hidden_).noalias() = d_output * a.h2.transpose();
  grad.segment(l.b3, sites_ + 1) = d_output.rowwise().sum();

  const Eigen::MatrixXd dz2 =
      (w3.transpose() * d_output).cwiseProduct((a.z2.array() > 0.0).cast<double>().matrix());
  Map(g + l.w2, hidden_, hidden_).noalias() = dz2 * a.h1.transpose();
  grad.segment(l.b2, hidden_) = dz2.rowwise().sum();

  const Eigen::MatrixXd dz1 =
      (w2.transpose() * dz2).cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
  Map(g + l.w1, hidden_, inputs_).noalias() = dz1 * a.input.transpose();
  grad.segment(l.b1, hidden_) = dz1.rowwise().sum();
  return grad;
}

}  // namespace ringdrive::ppo
