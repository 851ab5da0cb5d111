#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <numbers>

#include "ppo_fixtures.hpp"
#include "ringdrive/errors.hpp"
#include "ringdrive/ppo/trainer.hpp"

using namespace ringdrive;
using namespace ringdrive::ppo;

namespace {

ControlEnv tiny_env(int steps, MeasureKind reward = MeasureKind::Fidelity) {
  auto sys = RingSystem::bose_hubbard(4, 1, 1.0);
  TargetSpec t;
  t.kind = TargetKind::ProductSuperposition;
  t.omega = {0, 1};
  t.particles = 1;
  const auto initial = sys.undriven_ground_state().state;
  auto obj = make_objective(sys, t, true, false);
  return ControlEnv{sys, initial, obj, reward, steps, 2.0, 1.0};
}

PpoConfig tiny_config(std::uint64_t seed, int episodes) {
  PpoConfig c;
  c.hidden = 16;
  c.batch = 8;
  c.buffer_len = 32;
  c.episodes = episodes;
  c.alpha = 1e-3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("observation encoding") {
  CHECK(encode_observation(Eigen::MatrixXd(0, 12), {}, 6, 12, 1.0, 8.0).size() == 78);
  CHECK(encode_observation(Eigen::MatrixXd(0, 12), {}, 6, 12, 1.0, 8.0).isZero());

  Eigen::MatrixXd applied(2, 3);
  applied << 0.5, -1.0, 2.0, 1.0, 0.25, -0.5;
  const std::vector<double> times{1.5, 3.0};
  const auto full = encode_observation(applied, times, 2, 3, 2.0, 3.0);
  Eigen::VectorXd expect(8);
  expect << 0.25, -0.5, 1.0, 0.5, 0.5, 0.125, -0.25, 1.0;
  CHECK((full - expect).norm() < 1e-15);
  CHECK((full.array() != 0.0).all());

  const auto part = encode_observation(applied.topRows(1), std::span(times.data(), 1), 2, 3, 2.0, 3.0);
  CHECK(part.tail(4).isZero());
  CHECK_THROWS_AS(encode_observation(applied, times, 1, 3, 1.0, 1.0), InvalidArg);
  CHECK_THROWS_AS(encode_observation(applied, std::span(times.data(), 1), 2, 3, 1.0, 1.0), InvalidArg);
}

TEST_CASE("policy sampling") {
  Rng init(1);
  PolicyValueNet net(6, 8, 5, 1.0, init);
  Eigen::VectorXd head(6);
  head << 0.2, 0.4, -0.3, 1.7, -2.5, 0.0;
  fixture::set_head(net, head);
  const Eigen::VectorXd obs = Eigen::VectorXd::Constant(6, 0.3);

  SUBCASE("vanishing width returns the clamped mean") {
    net.parameters()(net.parameter_count() - 1) = -60.0;
    Rng rng(2);
    const auto s = policy_sample(net, obs, rng);
    Eigen::VectorXd expect(5);
    expect << 0.4, -0.3, 1.0, -1.0, 0.0;
    CHECK((s.action - expect).norm() < 1e-12);
    CHECK(s.action.cwiseAbs().maxCoeff() <= 1.0);
  }
  SUBCASE("log density at the mean") {
    Eigen::VectorXd mu(1);
    mu << 0.3;
    CHECK(gaussian_log_prob(mu, 0.0, mu) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
  }
  SUBCASE("log probability uses the pre-clamp sample") {
    Rng rng(3);
    const auto s = policy_sample(net, obs, rng);
    CHECK(s.log_prob == doctest::Approx(gaussian_log_prob(head.tail(5), net.log_sigma(), s.raw)));
    CHECK((s.action - s.raw.cwiseMax(-1.0).cwiseMin(1.0)).norm() == 0.0);
  }
  SUBCASE("empirical mean of raw samples") {
    Eigen::VectorXd inside(6);
    inside << 0.0, 0.5, -0.5, 0.25, -0.1, 0.0;
    fixture::set_head(net, inside);
    net.parameters()(net.parameter_count() - 1) = std::log(0.4);
    Rng rng(4);
    const int n = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(5);
    for (int i = 0; i < n; ++i) sum += policy_sample(net, obs, rng).raw;
    const Eigen::VectorXd mean = sum / n;
    for (int j = 0; j < 5; ++j) CHECK(std::abs(mean(j) - inside(1 + j)) < 3 * 0.4 / std::sqrt(double(n)));
  }
}

TEST_CASE("advantage and value targets") {
  CHECK(advantage(1.0, 0.3, 5.0, true, 0.99) == doctest::Approx(0.7));
  CHECK(advantage(0.0, 0.6, 0.6, false, 1.0) == doctest::Approx(0.0));
  CHECK(advantage(0.4, 0.1, 7.0, false, 0.0) == doctest::Approx(0.3));
  CHECK(td_target(0.0, 0.5, false, 0.9) == doctest::Approx(0.45));
  CHECK(td_target(0.8, 0.5, true, 0.9) == doctest::Approx(0.8));
}

TEST_CASE("rollout structure and rewards") {
  Rng init(5);
  const auto env1 = tiny_env(1);
  PolicyValueNet net(env1.observation_size(), 8, 4, 0.5, init);
  Rng rng(6);
  const auto ep = rollout(net, env1, rng);
  REQUIRE(ep.transitions.size() == 1);
  CHECK(ep.transitions[0].terminal);
  CHECK(ep.reward == ep.transitions[0].reward);
  CHECK(ep.reward == doctest::Approx(*ep.fidelity));

  const auto env3 = tiny_env(3);
  PolicyValueNet net3(env3.observation_size(), 8, 4, 2.0, init);
  for (int i = 0; i < 20; ++i) {
    const auto e = rollout(net3, env3, rng);
    REQUIRE(e.transitions.size() == 3);
    CHECK(e.transitions[0].reward == 0.0);
    CHECK(e.transitions[1].reward == 0.0);
    CHECK_FALSE(e.transitions[1].terminal);
    CHECK(e.reward >= 0.0);
    CHECK(e.reward <= 1.0 + 1e-9);
    for (const auto& t : e.transitions) {
      CHECK(t.action.cwiseAbs().maxCoeff() <= 1.0);
      CHECK(t.observation.size() == env3.observation_size());
    }
    CHECK((e.transitions[1].observation - e.transitions[0].next_observation).norm() == 0.0);
    CHECK(e.schedule.potentials.cwiseAbs().maxCoeff() <= env3.p_max);
  }
}

TEST_CASE("zero drive from the target eigenstate earns full reward") {
  auto sys = RingSystem::bose_hubbard(5, 1, 0.0);
  TargetSpec t;
  t.kind = TargetKind::SingleWinding;
  t.omega = {0};
  const auto gs = sys.undriven_ground_state().state;
  const ControlEnv env{sys, gs, make_objective(sys, t, true, false), MeasureKind::Fidelity, 2, 1.5, 1.0};
  Rng init(7);
  PolicyValueNet net(env.observation_size(), 8, 5, 1.0, init);
  fixture::set_head(net, Eigen::VectorXd::Zero(6));
  net.parameters()(net.parameter_count() - 1) = -60.0;
  Rng rng(8);
  CHECK(rollout(net, env, rng).reward == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("loss at the old policy reduces to the mean advantage") {
  Rng rng(9);
  PolicyValueNet net(8, 8, 3, 0.5, rng);
  const auto batch = fixture::random_batch(8, 3, 12, rng, 0.5);
  auto in = prepare_loss_inputs(net, net, batch, 0.99);
  for (Eigen::Index i = 0; i < 12; ++i) in.advantages(i) = rng.normal();
  const auto rep = ppo_loss(net, batch, in, PpoConfig{});
  CHECK(rep.policy == doctest::Approx(in.advantages.mean()).epsilon(1e-12));
  CHECK(rep.clipped == 0);
}

TEST_CASE("clip arithmetic selects (1 + eps) A for a large ratio and positive advantage") {
  Rng rng(10);
  PolicyValueNet net(8, 8, 3, 0.5, rng);
  const auto batch = fixture::random_batch(8, 3, 1, rng, 0.5);
  auto in = prepare_loss_inputs(net, net, batch, 0.99);
  in.advantages(0) = 2.0;
  in.old_log_probs(0) -= std::log(1.3);
  PpoConfig cfg;
  cfg.eps_clip = 0.1;
  const auto rep = ppo_loss(net, batch, in, cfg);
  CHECK(rep.policy == doctest::Approx(1.1 * 2.0).epsilon(1e-12));
  CHECK(rep.clipped == 1);
  in.advantages(0) = -2.0;
  CHECK(ppo_loss(net, batch, in, cfg).policy == doctest::Approx(1.3 * -2.0).epsilon(1e-12));
}

TEST_CASE("loss components") {
  Rng rng(11);
  PolicyValueNet net(8, 8, 3, 0.7, rng);
  Eigen::VectorXd head(4);
  head << 0.2, 1.5, -0.5, -3.0;
  fixture::set_head(net, head);
  const auto batch = fixture::random_batch(8, 3, 5, rng, 0.5);
  auto in = prepare_loss_inputs(net, net, batch, 0.99);
  in.targets.setConstant(1.0);
  PpoConfig cfg;
  const auto rep = ppo_loss(net, batch, in, cfg);
  CHECK(rep.value == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(rep.bound == doctest::Approx(0.25 + 4.0).epsilon(1e-12));
  CHECK(rep.entropy == doctest::Approx(0.5 * std::log(2 * std::numbers::pi * std::exp(1.0) * 0.49)));
  CHECK(rep.total == doctest::Approx(-rep.policy + cfg.c_value * rep.value - cfg.c_entropy * rep.entropy +
                                     cfg.c_bound * rep.bound));
}

TEST_CASE("backpropagation matches central finite differences") {
  int clipped = 0, bounded = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = fixture::gradient_check(seed);
    CHECK(r.rel_error < 1e-4);
    clipped += r.clipped > 0 && r.clipped < r.samples;
    bounded += r.bound > 0.0;
  }
  // both surrogate branches and the mean penalty are exercised
  CHECK(clipped > 0);
  CHECK(bounded > 0);
}

TEST_CASE("clipped branch only ever uses ratios inside [1 - eps, 1 + eps]") {
  Rng rng(12);
  PpoConfig cfg;
  cfg.eps_clip = 0.2;
  for (int trial = 0; trial < 50; ++trial) {
    PolicyValueNet net(8, 8, 3, 0.5, rng);
    PolicyValueNet old = net;
    for (Eigen::Index i = 0; i < old.parameter_count(); ++i) old.parameters()(i) += 0.3 * rng.normal();
    const auto batch = fixture::random_batch(8, 3, 32, rng, 1.0);
    auto in = prepare_loss_inputs(net, old, batch, 0.99);
    for (Eigen::Index i = 0; i < 32; ++i) in.advantages(i) = rng.normal();
    const auto rep = ppo_loss(net, batch, in, cfg);
    if (rep.clipped == 0) continue;
    CHECK(rep.clipped_ratio_min >= 1.0 - cfg.eps_clip);
    CHECK(rep.clipped_ratio_max <= 1.0 + cfg.eps_clip);
  }
}

TEST_CASE("Adam step") {
  Eigen::VectorXd p(3);
  p << 1.0, -2.0, 0.5;
  const Eigen::VectorXd start = p;
  Eigen::VectorXd g(3);
  g << 0.3, -4.0, 1e-3;
  Adam a(3);
  a.step(p, g, 0.01);
  for (int i = 0; i < 3; ++i) CHECK(std::abs((start(i) - p(i)) - 0.01 * (g(i) > 0 ? 1 : -1)) < 1e-6);

  Eigen::VectorXd q = start;
  Adam z(3);
  z.step(q, Eigen::VectorXd::Zero(3), 0.01);
  CHECK(q == start);

  Eigen::VectorXd r1 = start, r2 = start;
  Adam a1(3), a2(3);
  for (int i = 0; i < 5; ++i) {
    a1.step(r1, g * (i + 1), 0.01);
    a2.step(r2, g * (i + 1), 0.01);
  }
  CHECK(r1 == r2);
  CHECK_THROWS_AS(a1.step(r1, Eigen::VectorXd::Zero(2), 0.01), InvalidArg);
}

TEST_CASE("replay buffer capacity and FIFO overwrite") {
  ReplayBuffer b(4);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.reward = i;
    b.push(std::move(t));
    CHECK(b.size() <= 4);
  }
  std::vector<double> held;
  for (std::size_t i = 0; i < b.size(); ++i) held.push_back(b.at(i).reward);
  std::sort(held.begin(), held.end());
  CHECK(held == std::vector<double>{6, 7, 8, 9});
}

TEST_CASE("replay sampling is uniform") {
  const std::size_t k = 50;
  ReplayBuffer b(k);
  for (std::size_t i = 0; i < k; ++i) b.push(Transition{});
  Rng rng(13);
  const std::size_t n = 100000;
  std::vector<double> counts(k, 0.0);
  for (auto i : b.sample_indices(n, rng)) counts[i] += 1;
  const double expect = double(n) / k;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // upper 0.1% point of chi-square with 49 degrees of freedom
  CHECK(chi2 < 85.35);
}

TEST_CASE("config validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate(2));
  CHECK(c.buffer_for(3) == 1500);
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(2), InvalidArg);
  c = PpoConfig{};
  c.eps_clip = 0.0;
  CHECK_THROWS_AS(c.validate(2), InvalidArg);
  c = PpoConfig{};
  c.buffer_len = 100;
  CHECK_THROWS_AS(c.validate(2), InvalidArg);
}

TEST_CASE("single episode training") {
  const auto log = train(tiny_env(2), tiny_config(3, 1));
  REQUIRE(log.episodes.size() == 1);
  REQUIRE(log.best_schedule.has_value());
  CHECK(log.best_measure == log.episodes[0].reward);
  CHECK(log.best_schedule->steps() == 2);
}

TEST_CASE("training is deterministic and its best measure is monotone") {
  const auto a = train(tiny_env(2), tiny_config(4, 60));
  const auto b = train(tiny_env(2), tiny_config(4, 60));
  const auto c = train(tiny_env(2), tiny_config(5, 60));
  REQUIRE(a.episodes.size() == 60);
  bool differs = false;
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].reward == b.episodes[i].reward);
    CHECK(a.episodes[i].sigma == b.episodes[i].sigma);
    CHECK(a.episodes[i].loss_total == b.episodes[i].loss_total);
    differs |= a.episodes[i].reward != c.episodes[i].reward;
    if (i > 0) CHECK(a.episodes[i].best >= a.episodes[i - 1].best);
    CHECK(a.episodes[i].best >= a.episodes[i].reward);
  }
  CHECK(differs);
  CHECK_FALSE(a.aborted);
}

TEST_CASE("checkpoint resume is bit-identical") {
  const auto path = std::filesystem::temp_directory_path() / "ringdrive-ckpt-test.txt";
  const auto env = tiny_env(2);
  const auto cfg = tiny_config(6, 50);
  Trainer full(env, cfg);
  full.run_all();

  Trainer first(env, cfg);
  first.run(20);
  first.save_checkpoint(path.string());
  Trainer resumed = Trainer::load_checkpoint(path.string(), env);
  CHECK(resumed.completed() == 20);
  resumed.run_all();
  std::filesystem::remove(path);

  REQUIRE(resumed.log().episodes.size() == full.log().episodes.size());
  for (std::size_t i = 0; i < full.log().episodes.size(); ++i) {
    CHECK(resumed.log().episodes[i].reward == full.log().episodes[i].reward);
    CHECK(resumed.log().episodes[i].sigma == full.log().episodes[i].sigma);
  }
  CHECK(resumed.network().parameters() == full.network().parameters());
}

TEST_CASE("stop_at ends training early") {
  auto cfg = tiny_config(7, 500);
  cfg.stop_at = 0.0;
  const auto log = train(tiny_env(2), cfg);
  CHECK(log.episodes.size() == 1);
}
