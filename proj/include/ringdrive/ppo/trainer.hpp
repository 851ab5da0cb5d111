#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ringdrive/ppo/network.hpp"
#include "ringdrive/ppo/replay.hpp"
#include "ringdrive/ppo/rng.hpp"
#include "ringdrive/protocol.hpp"
#include "ringdrive/system.hpp"

namespace ringdrive::ppo {

struct PpoConfig {
  double gamma = 0.99;
  double eps_clip = 0.1;
  double c_value = 0.5;
  double c_entropy = 0.02;
  // Quadratic penalty on policy means outside the clamp range [-1, 1].
  double c_bound = 10.0;
  double alpha = 2e-4;
  int hidden = 200;
  int episodes = 120000;
  int batch = 500;
  int buffer_len = 0;  // 0 selects 500 * N_T
  double sigma_init = 0.5;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Stop once the best measure reaches this value.
  std::optional<double> stop_at;

  int buffer_for(int steps) const { return buffer_len > 0 ? buffer_len : 500 * steps; }
  void validate(int steps) const;
};

// Everything a rollout needs: the model, where it starts, what it is scored
// on, and the control discretization.
struct ControlEnv {
  RingSystem system;
  StateVector initial;
  Objective objective;
  MeasureKind reward = MeasureKind::Fidelity;
  int steps = 1;
  double total_time = 1.0;
  double p_max = 1.0;

  int observation_size() const { return (system.sites() + 1) * steps; }
  double dt() const { return total_time / steps; }
};

// (L+1)*N_T vector: for each applied step k, the L potentials divided by
// P_max followed by the step's end time divided by T; later steps are zero.
// `applied` has one row per step taken so far (physical units).
Eigen::VectorXd encode_observation(const Eigen::MatrixXd& applied,
                                   std::span<const double> end_times,
                                   int total_steps, int sites, double p_max,
                                   double total_time);

struct PolicySample {
  Eigen::VectorXd action;  // clamped to [-bound, bound]
  Eigen::VectorXd raw;     // pre-clamp sample
  double log_prob = 0.0;   // density of the pre-clamp sample
};

// Diagonal Gaussian log density with a shared width.
double gaussian_log_prob(const Eigen::VectorXd& mean, double log_sigma,
                         const Eigen::VectorXd& x);

PolicySample policy_sample(const PolicyValueNet& net, const Eigen::VectorXd& obs,
                           Rng& rng, double bound = 1.0);

struct Episode {
  std::vector<Transition> transitions;
  PotentialSchedule schedule;
  double reward = 0.0;
  std::optional<double> fidelity;
  std::optional<double> certification;
};

// Runs N_T steps. `after_step` fires after each transition is produced and
// may update the network in place.
Episode rollout(const PolicyValueNet& net, const ControlEnv& env, Rng& rng,
                const std::function<void(const Transition&)>& after_step = {});

// r + gamma V' (0 when terminal) - V
double advantage(double reward, double value, double next_value, bool terminal,
                 double gamma);
double td_target(double reward, double next_value, bool terminal, double gamma);

struct Minibatch {
  Eigen::MatrixXd observations;       // inputs x M
  Eigen::MatrixXd next_observations;  // inputs x M
  Eigen::MatrixXd raw_actions;        // L x M
  Eigen::VectorXd rewards;
  std::vector<bool> terminal;

  Eigen::Index size() const { return observations.cols(); }
};

Minibatch gather(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices);

// Quantities held fixed while differentiating the loss: value targets,
// advantages (both from the current critic) and old-policy log densities.
struct LossInputs {
  Eigen::VectorXd targets;
  Eigen::VectorXd advantages;
  Eigen::VectorXd old_log_probs;
};

LossInputs prepare_loss_inputs(const PolicyValueNet& net, const PolicyValueNet& old_net,
                               const Minibatch& batch, double gamma);

struct LossReport {
  double total = 0.0;    // -L_p + c_v L_V - c_s L_S + c_b B  (minimized)
  double policy = 0.0;   // L_p, clipped surrogate
  double value = 0.0;    // L_V
  double entropy = 0.0;  // L_S, per action component
  double bound = 0.0;    // mean over samples of sum_j max(0, |mu_j| - 1)^2
  Eigen::VectorXd gradient;
  int clipped = 0;
  // Range of ratios actually used where the clipped branch won.
  double clipped_ratio_min = std::numeric_limits<double>::infinity();
  double clipped_ratio_max = -std::numeric_limits<double>::infinity();
};

LossReport ppo_loss(const PolicyValueNet& net, const Minibatch& batch,
                    const LossInputs& inputs, const PpoConfig& config);

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double alpha);

  Eigen::VectorXd& first_moment() { return m_; }
  Eigen::VectorXd& second_moment() { return v_; }
  std::int64_t& iterations() { return t_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }
  std::int64_t iterations() const { return t_; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  Eigen::VectorXd m_, v_;
  std::int64_t t_ = 0;
};

struct EpisodeRecord {
  int episode = 0;
  double reward = 0.0;
  double fidelity = std::numeric_limits<double>::quiet_NaN();
  double certification = std::numeric_limits<double>::quiet_NaN();
  double best = 0.0;
  double sigma = 0.0;
  double loss_total = 0.0;
  double loss_policy = 0.0;
  double loss_value = 0.0;
  double loss_entropy = 0.0;
  bool failed = false;
};

struct TrainLog {
  std::vector<EpisodeRecord> episodes;
  std::optional<PotentialSchedule> best_schedule;
  double best_measure = -std::numeric_limits<double>::infinity();
  bool aborted = false;
  std::string abort_reason;
};

using EpisodeCallback = std::function<void(const EpisodeRecord&)>;

// Stateful training loop; can be checkpointed and resumed bit-identically.
class Trainer {
 public:
  Trainer(ControlEnv env, PpoConfig config);

  // Runs up to `episodes` more episodes (bounded by config.episodes).
  void run(int episodes, const EpisodeCallback& on_episode = {});
  void run_all(const EpisodeCallback& on_episode = {});

  const TrainLog& log() const { return log_; }
  const PolicyValueNet& network() const { return net_; }
  const PpoConfig& config() const { return config_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int completed() const { return static_cast<int>(log_.episodes.size()); }
  bool finished() const;

  void save_checkpoint(const std::string& path) const;
  // `env` must describe the same system the checkpoint was trained on.
  static Trainer load_checkpoint(const std::string& path, ControlEnv env);

 private:
  void update(const PolicyValueNet& old_net, EpisodeRecord& rec, int& updates);

  ControlEnv env_;
  PpoConfig config_;
  Rng action_rng_;
  Rng replay_rng_;
  PolicyValueNet net_;
  Adam adam_;
  ReplayBuffer buffer_;
  TrainLog log_;
};

TrainLog train(const ControlEnv& env, const PpoConfig& config,
               const EpisodeCallback& on_episode = {});

}  // namespace ringdrive::ppo
