#include "ringdrive/ppo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "ringdrive/errors.hpp"

namespace ringdrive::ppo {

namespace {

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

std::uint64_t splitmix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void PpoConfig::validate(int steps) const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArg("ppo.gamma must lie in (0, 1]");
  if (!(eps_clip > 0.0)) throw InvalidArg("ppo.eps_clip must be positive");
  if (!(alpha > 0.0)) throw InvalidArg("ppo.alpha must be positive");
  if (hidden < 1) throw InvalidArg("ppo.N_H must be positive");
  if (episodes < 1) throw InvalidArg("ppo.episodes must be positive");
  if (batch < 1) throw InvalidArg("ppo.batch must be positive");
  if (batch > buffer_for(steps)) throw InvalidArg("ppo.batch exceeds the replay buffer length");
  if (!(sigma_init > 0.0)) throw InvalidArg("ppo.sigma_init must be positive");
  if (c_value < 0.0 || c_entropy < 0.0 || c_bound < 0.0) throw InvalidArg("ppo loss coefficients must be non-negative");
}

Eigen::VectorXd encode_observation(const Eigen::MatrixXd& applied,
                                   std::span<const double> end_times,
                                   int total_steps, int sites, double p_max,
                                   double total_time) {
  const auto taken = applied.rows();
  if (taken < 0 || taken > total_steps)
    throw InvalidArg("observation history longer than the protocol");
  if (applied.cols() != sites && taken > 0)
    throw InvalidArg("observation history has the wrong number of sites");
  if (static_cast<Eigen::Index>(end_times.size()) != taken)
    throw InvalidArg("observation history needs one time per step");
  if (!(p_max > 0.0) || !(total_time > 0.0))
    throw InvalidArg("observation scales must be positive");

  Eigen::VectorXd obs = Eigen::VectorXd::Zero((sites + 1) * total_steps);
  for (Eigen::Index k = 0; k < taken; ++k) {
    const Eigen::Index base = k * (sites + 1);
    obs.segment(base, sites) = applied.row(k).transpose() / p_max;
    obs(base + sites) = end_times[k] / total_time;
  }
  return obs;
}

double gaussian_log_prob(const Eigen::VectorXd& mean, double log_sigma,
                         const Eigen::VectorXd& x) {
  const double inv_var = std::exp(-2.0 * log_sigma);
  const auto n = static_cast<double>(mean.size());
  return -0.5 * (x - mean).squaredNorm() * inv_var - n * log_sigma - 0.5 * n * kLogTwoPi;
}

PolicySample policy_sample(const PolicyValueNet& net, const Eigen::VectorXd& obs,
                           Rng& rng, double bound) {
  const Eigen::VectorXd out = net.output(obs);
  const Eigen::VectorXd mean = out.tail(net.sites());
  const double sigma = net.sigma();
  PolicySample s;
  s.raw.resize(net.sites());
  for (Eigen::Index j = 0; j < s.raw.size(); ++j) s.raw(j) = mean(j) + sigma * rng.normal();
  s.action = s.raw.cwiseMax(-bound).cwiseMin(bound);
  s.log_prob = gaussian_log_prob(mean, net.log_sigma(), s.raw);
  return s;
}

Episode rollout(const PolicyValueNet& net, const ControlEnv& env, Rng& rng,
                const std::function<void(const Transition&)>& after_step) {
  const int sites = env.system.sites();
  const int steps = env.steps;
  if (steps < 1) throw InvalidArg("rollout needs at least one step");
  const double dt = env.dt();

  Episode ep;
  ep.schedule = PotentialSchedule{dt, env.p_max, Eigen::MatrixXd::Zero(steps, sites)};
  std::vector<double> end_times;
  end_times.reserve(steps);
  std::vector<double> row(sites);
  StateVector psi = env.initial;

  auto observe = [&](int taken) {
    return encode_observation(ep.schedule.potentials.topRows(taken),
                              std::span<const double>(end_times.data(), taken), steps,
                              sites, env.p_max, env.total_time);
  };

  for (int t = 0; t < steps; ++t) {
    Transition tr;
    tr.observation = observe(t);
    PolicySample sample = policy_sample(net, tr.observation, rng, 1.0);
    for (int j = 0; j < sites; ++j) {
      row[j] = sample.action(j) * env.p_max;
      ep.schedule.potentials(t, j) = row[j];
    }
    psi = evolve(psi, env.system.hamiltonian(row), dt, env.system.propagator());
    end_times.push_back(dt * (t + 1));

    tr.terminal = (t == steps - 1);
    tr.reward = tr.terminal ? env.objective.measure(env.reward, psi) : 0.0;
    tr.raw_action = std::move(sample.raw);
    tr.action = std::move(sample.action);
    tr.next_observation = observe(t + 1);
    ep.transitions.push_back(std::move(tr));
    if (after_step) after_step(ep.transitions.back());
  }

  ep.reward = ep.transitions.back().reward;
  if (env.objective.has_fidelity())
    ep.fidelity = env.objective.measure(MeasureKind::Fidelity, psi);
  if (env.objective.has_certification())
    ep.certification = env.objective.measure(MeasureKind::Certification, psi);
  return ep;
}

double td_target(double reward, double next_value, bool terminal, double gamma) {
  return reward + (terminal ? 0.0 : gamma * next_value);
}

double advantage(double reward, double value, double next_value, bool terminal,
                 double gamma) {
  return td_target(reward, next_value, terminal, gamma) - value;
}

Minibatch gather(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw InvalidArg("empty minibatch");
  const Transition& first = buffer.at(indices.front());
  const auto m = static_cast<Eigen::Index>(indices.size());
  Minibatch b;
  b.observations.resize(first.observation.size(), m);
  b.next_observations.resize(first.next_observation.size(), m);
  b.raw_actions.resize(first.raw_action.size(), m);
  b.rewards.resize(m);
  b.terminal.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Transition& t = buffer.at(indices[i]);
    b.observations.col(i) = t.observation;
    b.next_observations.col(i) = t.next_observation;
    b.raw_actions.col(i) = t.raw_action;
    b.rewards(i) = t.reward;
    b.terminal[i] = t.terminal;
  }
  return b;
}

LossInputs prepare_loss_inputs(const PolicyValueNet& net, const PolicyValueNet& old_net,
                               const Minibatch& batch, double gamma) {
  const Eigen::Index m = batch.size();
  const Eigen::MatrixXd out = net.output(batch.observations);
  const Eigen::MatrixXd next_out = net.output(batch.next_observations);
  const Eigen::MatrixXd old_out = old_net.output(batch.observations);
  const int sites = net.sites();

  LossInputs in;
  in.targets.resize(m);
  in.advantages.resize(m);
  in.old_log_probs.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    in.targets(i) = td_target(batch.rewards(i), next_out(0, i), batch.terminal[i], gamma);
    in.advantages(i) =
        advantage(batch.rewards(i), out(0, i), next_out(0, i), batch.terminal[i], gamma);
    in.old_log_probs(i) = gaussian_log_prob(old_out.col(i).tail(sites), old_net.log_sigma(),
                                            batch.raw_actions.col(i));
  }
  return in;
}

LossReport ppo_loss(const PolicyValueNet& net, const Minibatch& batch,
                    const LossInputs& inputs, const PpoConfig& config) {
  const Eigen::Index m = batch.size();
  if (m == 0) throw InvalidArg("ppo_loss: empty minibatch");
  const int sites = net.sites();
  const auto act = net.forward(batch.observations);
  const double log_sigma = net.log_sigma();
  const double inv_var = std::exp(-2.0 * log_sigma);
  const double inv_m = 1.0 / static_cast<double>(m);
  const double lo = 1.0 - config.eps_clip, hi = 1.0 + config.eps_clip;

  LossReport rep;
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(sites + 1, m);
  double d_log_sigma = 0.0;

  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd diff = batch.raw_actions.col(i) - act.output.col(i).tail(sites);
    const double sq = diff.squaredNorm() * inv_var;
    const double log_prob = -0.5 * sq - sites * log_sigma - 0.5 * sites * kLogTwoPi;
    const double ratio = std::exp(log_prob - inputs.old_log_probs(i));
    const double a = inputs.advantages(i);
    const double clipped_ratio = std::clamp(ratio, lo, hi);

    if (clipped_ratio * a < ratio * a) {
      // clipped branch: constant in theta
      rep.policy += clipped_ratio * a * inv_m;
      ++rep.clipped;
      rep.clipped_ratio_min = std::min(rep.clipped_ratio_min, clipped_ratio);
      rep.clipped_ratio_max = std::max(rep.clipped_ratio_max, clipped_ratio);
    } else {
      rep.policy += ratio * a * inv_m;
      // d(-L_p)/d log pi
      const double g = -inv_m * a * ratio;
      d_out.col(i).tail(sites) += g * inv_var * diff;
      d_log_sigma += g * (sq - sites);
    }

    for (int j = 0; j < sites; ++j) {
      const double mu = act.output(1 + j, i);
      const double over = std::abs(mu) - 1.0;
      if (over > 0.0) {
        rep.bound += over * over * inv_m;
        d_out(1 + j, i) += config.c_bound * 2.0 * over * (mu > 0.0 ? 1.0 : -1.0) * inv_m;
      }
    }
    const double err = act.output(0, i) - inputs.targets(i);
    rep.value += err * err * inv_m;
    d_out(0, i) += config.c_value * 2.0 * err * inv_m;
  }

  // differential entropy of one action component
  rep.entropy = 0.5 * (kLogTwoPi + 1.0) + log_sigma;
  d_log_sigma -= config.c_entropy;

  rep.total = -rep.policy + config.c_value * rep.value - config.c_entropy * rep.entropy +
              config.c_bound * rep.bound;
  rep.gradient = net.backward(act, d_out);
  rep.gradient(rep.gradient.size() - 1) = d_log_sigma;
  return rep;
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double alpha) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw InvalidArg("Adam: parameter and gradient sizes differ");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= alpha * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

Trainer::Trainer(ControlEnv env, PpoConfig config)
    : env_(std::move(env)),
      config_(config),
      action_rng_(splitmix(config.seed, 1)),
      replay_rng_(splitmix(config.seed, 2)) {
  config_.validate(env_.steps);
  if (env_.steps < 1) throw InvalidArg("protocol needs at least one step");
  if (!(env_.total_time > 0.0)) throw InvalidArg("protocol time must be positive");
  if (!(env_.p_max > 0.0)) throw InvalidArg("P_max must be positive");
  Rng init(splitmix(config.seed, 0));
  net_ = PolicyValueNet(env_.observation_size(), config_.hidden, env_.system.sites(),
                        config_.sigma_init, init);
  adam_ = Adam(net_.parameter_count(), config_.adam_beta1, config_.adam_beta2,
               config_.adam_eps);
  buffer_ = ReplayBuffer(static_cast<std::size_t>(config_.buffer_for(env_.steps)));
}

bool Trainer::finished() const {
  if (log_.aborted) return true;
  if (completed() >= config_.episodes) return true;
  return config_.stop_at && log_.best_measure >= *config_.stop_at;
}

void Trainer::update(const PolicyValueNet& old_net, EpisodeRecord& rec, int& updates) {
  const auto idx =
      buffer_.sample_indices(static_cast<std::size_t>(config_.batch), replay_rng_);
  const Minibatch mb = gather(buffer_, idx);
  const LossInputs inputs = prepare_loss_inputs(net_, old_net, mb, config_.gamma);
  const LossReport rep = ppo_loss(net_, mb, inputs, config_);
  if (!std::isfinite(rep.total) || !rep.gradient.allFinite())
    throw NonFinite("non-finite loss or gradient in episode " + std::to_string(rec.episode));
  adam_.step(net_.parameters(), rep.gradient, config_.alpha);
  rec.loss_total += rep.total;
  rec.loss_policy += rep.policy;
  rec.loss_value += rep.value;
  rec.loss_entropy += rep.entropy;
  ++updates;
}

void Trainer::run(int episodes, const EpisodeCallback& on_episode) {
  for (int n = 0; n < episodes && !finished(); ++n) {
    EpisodeRecord rec;
    rec.episode = completed();
    const PolicyValueNet old_net = net_;
    int updates = 0;
    try {
      Episode ep = rollout(net_, env_, action_rng_, [&](const Transition&) {
        if (!buffer_.empty()) update(old_net, rec, updates);
      });
      for (auto& t : ep.transitions) buffer_.push(std::move(t));
      rec.reward = ep.reward;
      if (ep.fidelity) rec.fidelity = *ep.fidelity;
      if (ep.certification) rec.certification = *ep.certification;
      if (ep.reward > log_.best_measure) {
        log_.best_measure = ep.reward;
        log_.best_schedule = ep.schedule;
      }
    } catch (const NonFinite& e) {
      rec.failed = true;
      log_.aborted = true;
      log_.abort_reason = e.what();
    } catch (const Error&) {
      // propagation failure: the episode is recorded and skipped
      rec.failed = true;
    }
    if (updates > 0) {
      rec.loss_total /= updates;
      rec.loss_policy /= updates;
      rec.loss_value /= updates;
      rec.loss_entropy /= updates;
    }
    rec.best = std::isfinite(log_.best_measure) ? log_.best_measure : 0.0;
    rec.sigma = net_.sigma();
    log_.episodes.push_back(rec);
    if (on_episode) on_episode(rec);
  }
}

void Trainer::run_all(const EpisodeCallback& on_episode) {
  run(config_.episodes - completed(), on_episode);
}

TrainLog train(const ControlEnv& env, const PpoConfig& config,
               const EpisodeCallback& on_episode) {
  Trainer trainer(env, config);
  trainer.run_all(on_episode);
  return trainer.log();
}

}  // namespace ringdrive::ppo
