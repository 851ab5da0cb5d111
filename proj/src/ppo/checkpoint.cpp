// Versioned flat binary checkpoint for Trainer. Host byte order.
//
//   magic "RDCKPT\0\0" | u32 version
//   config | env signature | two RNG states
//   network dims + flat parameters | Adam moments + step count
//   replay buffer slots + head | training log

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ringdrive/errors.hpp"
#include "ringdrive/ppo/trainer.hpp"

namespace ringdrive::ppo {

namespace {

constexpr char kMagic[8] = {'R', 'D', 'C', 'K', 'P', 'T', 0, 0};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& os) : os_(os) {}
  template <typename T>
  void pod(const T& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vec(const Eigen::VectorXd& v) {
    pod<std::int64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void mat(const Eigen::MatrixXd& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    os_.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }

 private:
  std::ofstream& os_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& is) : is_(is) {}
  template <typename T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 20)) throw Error("checkpoint: corrupt string length");
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  Eigen::VectorXd vec() {
    const auto n = pod<std::int64_t>();
    if (n < 0 || n > (1LL << 32)) throw Error("checkpoint: corrupt vector length");
    Eigen::VectorXd v(n);
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }
  Eigen::MatrixXd mat() {
    const auto r = pod<std::int64_t>();
    const auto c = pod<std::int64_t>();
    if (r < 0 || c < 0 || r * c > (1LL << 32)) throw Error("checkpoint: corrupt matrix shape");
    Eigen::MatrixXd m(r, c);
    is_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    check();
    return m;
  }

 private:
  void check() {
    if (!is_) throw Error("checkpoint: truncated file");
  }
  std::ifstream& is_;
};

void write_config(Writer& w, const PpoConfig& c) {
  w.pod(c.gamma);
  w.pod(c.eps_clip);
  w.pod(c.c_value);
  w.pod(c.c_entropy);
  w.pod(c.c_bound);
  w.pod(c.alpha);
  w.pod<std::int32_t>(c.hidden);
  w.pod<std::int32_t>(c.episodes);
  w.pod<std::int32_t>(c.batch);
  w.pod<std::int32_t>(c.buffer_len);
  w.pod(c.sigma_init);
  w.pod(c.seed);
  w.pod(c.adam_beta1);
  w.pod(c.adam_beta2);
  w.pod(c.adam_eps);
  w.pod<std::uint8_t>(c.stop_at.has_value());
  w.pod(c.stop_at.value_or(0.0));
}

PpoConfig read_config(Reader& r) {
  PpoConfig c;
  c.gamma = r.pod<double>();
  c.eps_clip = r.pod<double>();
  c.c_value = r.pod<double>();
  c.c_entropy = r.pod<double>();
  c.c_bound = r.pod<double>();
  c.alpha = r.pod<double>();
  c.hidden = r.pod<std::int32_t>();
  c.episodes = r.pod<std::int32_t>();
  c.batch = r.pod<std::int32_t>();
  c.buffer_len = r.pod<std::int32_t>();
  c.sigma_init = r.pod<double>();
  c.seed = r.pod<std::uint64_t>();
  c.adam_beta1 = r.pod<double>();
  c.adam_beta2 = r.pod<double>();
  c.adam_eps = r.pod<double>();
  const bool has_stop = r.pod<std::uint8_t>() != 0;
  const double stop = r.pod<double>();
  if (has_stop) c.stop_at = stop;
  return c;
}

void write_record(Writer& w, const EpisodeRecord& e) {
  w.pod<std::int32_t>(e.episode);
  for (double v : {e.reward, e.fidelity, e.certification, e.best, e.sigma, e.loss_total,
                   e.loss_policy, e.loss_value, e.loss_entropy})
    w.pod(v);
  w.pod<std::uint8_t>(e.failed);
}

EpisodeRecord read_record(Reader& r) {
  EpisodeRecord e;
  e.episode = r.pod<std::int32_t>();
  for (double* v : {&e.reward, &e.fidelity, &e.certification, &e.best, &e.sigma,
                    &e.loss_total, &e.loss_policy, &e.loss_value, &e.loss_entropy})
    *v = r.pod<double>();
  e.failed = r.pod<std::uint8_t>() != 0;
  return e;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open checkpoint for writing: " + tmp);
    Writer w(os);
    os.write(kMagic, sizeof(kMagic));
    w.pod(kVersion);
    write_config(w, config_);

    w.pod<std::int32_t>(env_.system.sites());
    w.pod<std::int32_t>(env_.steps);
    w.pod<std::uint64_t>(env_.system.dim());
    w.pod(env_.total_time);
    w.pod(env_.p_max);

    w.str(action_rng_.state());
    w.str(replay_rng_.state());

    w.pod<std::int32_t>(net_.inputs());
    w.pod<std::int32_t>(net_.hidden());
    w.pod<std::int32_t>(net_.sites());
    w.vec(net_.parameters());

    w.vec(adam_.first_moment());
    w.vec(adam_.second_moment());
    w.pod<std::int64_t>(adam_.iterations());

    w.pod<std::uint64_t>(buffer_.capacity());
    w.pod<std::uint64_t>(buffer_.head());
    w.pod<std::uint64_t>(buffer_.slots().size());
    for (const Transition& t : buffer_.slots()) {
      w.vec(t.observation);
      w.vec(t.raw_action);
      w.vec(t.action);
      w.pod(t.reward);
      w.vec(t.next_observation);
      w.pod<std::uint8_t>(t.terminal);
    }

    w.pod<std::uint64_t>(log_.episodes.size());
    for (const auto& e : log_.episodes) write_record(w, e);
    w.pod(log_.best_measure);
    w.pod<std::uint8_t>(log_.best_schedule.has_value());
    if (log_.best_schedule) {
      w.pod(log_.best_schedule->dt);
      w.pod(log_.best_schedule->p_max);
      w.mat(log_.best_schedule->potentials);
    }
    w.pod<std::uint8_t>(log_.aborted);
    w.str(log_.abort_reason);
    if (!os) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Trainer Trainer::load_checkpoint(const std::string& path, ControlEnv env) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error("not a ringdrive checkpoint: " + path);
  Reader r(is);
  if (r.pod<std::uint32_t>() != kVersion) throw Error("unsupported checkpoint version");

  const PpoConfig config = read_config(r);
  Trainer t(std::move(env), config);

  const auto sites = r.pod<std::int32_t>();
  const auto steps = r.pod<std::int32_t>();
  const auto dim = r.pod<std::uint64_t>();
  const double total_time = r.pod<double>();
  const double p_max = r.pod<double>();
  if (sites != t.env_.system.sites() || steps != t.env_.steps || dim != t.env_.system.dim() ||
      total_time != t.env_.total_time || p_max != t.env_.p_max)
    throw InvalidArg("checkpoint was written for a different environment");

  t.action_rng_.restore(r.str());
  t.replay_rng_.restore(r.str());

  const auto inputs = r.pod<std::int32_t>();
  const auto hidden = r.pod<std::int32_t>();
  const auto net_sites = r.pod<std::int32_t>();
  if (inputs != t.net_.inputs() || hidden != t.net_.hidden() || net_sites != t.net_.sites())
    throw Error("checkpoint network shape mismatch");
  Eigen::VectorXd params = r.vec();
  if (params.size() != t.net_.parameter_count()) throw Error("checkpoint parameter count mismatch");
  t.net_.parameters() = std::move(params);

  t.adam_.first_moment() = r.vec();
  t.adam_.second_moment() = r.vec();
  t.adam_.iterations() = r.pod<std::int64_t>();

  const auto capacity = r.pod<std::uint64_t>();
  const auto head = r.pod<std::uint64_t>();
  const auto count = r.pod<std::uint64_t>();
  std::vector<Transition> slots;
  slots.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition tr;
    tr.observation = r.vec();
    tr.raw_action = r.vec();
    tr.action = r.vec();
    tr.reward = r.pod<double>();
    tr.next_observation = r.vec();
    tr.terminal = r.pod<std::uint8_t>() != 0;
    slots.push_back(std::move(tr));
  }
  t.buffer_ = ReplayBuffer::restore(capacity, std::move(slots), head);

  const auto episodes = r.pod<std::uint64_t>();
  t.log_.episodes.reserve(episodes);
  for (std::uint64_t i = 0; i < episodes; ++i) t.log_.episodes.push_back(read_record(r));
  t.log_.best_measure = r.pod<double>();
  if (r.pod<std::uint8_t>() != 0) {
    PotentialSchedule s;
    s.dt = r.pod<double>();
    s.p_max = r.pod<double>();
    s.potentials = r.mat();
    t.log_.best_schedule = std::move(s);
  }
  t.log_.aborted = r.pod<std::uint8_t>() != 0;
  t.log_.abort_reason = r.str();
  return t;
}

}  // namespace ringdrive::ppo
