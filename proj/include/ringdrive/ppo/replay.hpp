#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ringdrive/ppo/rng.hpp"

namespace ringdrive::ppo {

struct Transition {
  Eigen::VectorXd observation;
  Eigen::VectorXd raw_action;  // pre-clamp Gaussian sample, units of P_max
  Eigen::VectorXd action;      // clamped to [-1, 1], units of P_max
  double reward = 0.0;
  Eigen::VectorXd next_observation;
  bool terminal = false;
};

// Fixed-capacity FIFO of transitions; the oldest entry is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 0);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  // Uniform draws with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  const Transition& at(std::size_t i) const { return items_[i]; }

  // Raw slot layout, for checkpoints.
  const std::vector<Transition>& slots() const { return items_; }
  std::size_t head() const { return head_; }
  static ReplayBuffer restore(std::size_t capacity, std::vector<Transition> slots,
                              std::size_t head);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
};

}  // namespace ringdrive::ppo
