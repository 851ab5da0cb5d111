#include "ringdrive/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace ringdrive::experiment {

namespace fs = std::filesystem;

ConfigError::ConfigError(std::string field, const std::string& message)
    : InvalidArg(field + ": " + message), field_(std::move(field)) {}

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::Barrier: return "barrier";
    case ProtocolKind::Fcp: return "fcp";
    case ProtocolKind::MinTimeScan: return "min_time_scan";
    case ProtocolKind::MaxFidelityScan: return "max_fidelity_scan";
  }
  return "unknown";
}

namespace {

const char* measure_name(MeasureKind kind) {
  return kind == MeasureKind::Fidelity ? "F" : "W";
}

const char* measure_name(MeasureSelect m) {
  switch (m) {
    case MeasureSelect::F: return "F";
    case MeasureSelect::W: return "W";
    case MeasureSelect::Both: return "both";
  }
  return "F";
}

// Strict reader for one JSON object: typed getters, defaults, and a final
// check that no unknown keys remain.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where(), "expected an object");
  }

  std::string field(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    if (!obj_.contains(key)) throw ConfigError(field(key), "missing required field");
    seen_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key), "must be finite");
    return x;
  }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ConfigError(field(key), "must be positive");
    return x;
  }

  long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<long long>();
  }

  int bounded_int(const std::string& key, long long lo, std::optional<long long> fallback = std::nullopt) {
    const long long x = integer(key, fallback);
    if (x < lo || x > std::numeric_limits<int>::max())
      throw ConfigError(field(key), "must be an integer >= " + std::to_string(lo));
    return static_cast<int>(x);
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  template <typename T>
  T require(const std::string& key, const std::optional<T>& fallback) {
    if (!fallback) throw ConfigError(field(key), "missing required field");
    return *fallback;
  }
  std::string where() const { return path_.empty() ? "/" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

// Either an explicit list or {"from", "to", "step"}.
std::vector<double> read_grid(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(path + "/" + std::to_string(i), "expected a number");
      out.push_back(v[i].get<double>());
    }
  } else if (v.is_object()) {
    ObjectReader r(v, path);
    const double from = r.number("from");
    const double to = r.number("to");
    const double step = r.positive("step");
    r.finish();
    if (to < from) throw ConfigError(path + "/to", "must not be below from");
    const auto n = static_cast<long long>(std::floor((to - from) / step + 1e-9)) + 1;
    if (n > 100000) throw ConfigError(path + "/step", "grid too large");
    for (long long i = 0; i < n; ++i) out.push_back(from + static_cast<double>(i) * step);
  } else {
    throw ConfigError(path, "expected an array or {from, to, step}");
  }
  if (out.empty()) throw ConfigError(path, "grid is empty");
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > 0.0) || !std::isfinite(out[i]))
      throw ConfigError(path, "grid values must be positive");
  return out;
}

MeasureSelect parse_measure(const std::string& s, const std::string& path) {
  if (s == "F") return MeasureSelect::F;
  if (s == "W") return MeasureSelect::W;
  if (s == "both") return MeasureSelect::Both;
  throw ConfigError(path, "expected \"F\", \"W\" or \"both\"");
}

ppo::PpoConfig parse_ppo(const json& v, const std::string& path) {
  ppo::PpoConfig c;
  ObjectReader r(v, path);
  c.gamma = r.number("gamma", c.gamma);
  c.eps_clip = r.number("eps_clip", c.eps_clip);
  c.c_value = r.number("c_v", c.c_value);
  c.c_entropy = r.number("c_s", c.c_entropy);
  c.c_bound = r.number("c_b", c.c_bound);
  c.alpha = r.number("alpha", c.alpha);
  c.hidden = r.bounded_int("N_H", 1, c.hidden);
  c.episodes = r.bounded_int("N_E", 1, c.episodes);
  c.batch = r.bounded_int("batch", 1, c.batch);
  c.buffer_len = r.bounded_int("buffer_len", 0, c.buffer_len);
  c.sigma_init = r.number("sigma_init", c.sigma_init);
  c.adam_beta1 = r.number("adam_beta1", c.adam_beta1);
  c.adam_beta2 = r.number("adam_beta2", c.adam_beta2);
  c.adam_eps = r.number("adam_eps", c.adam_eps);
  if (r.has("stop_at")) c.stop_at = r.number("stop_at");
  r.finish();

  auto check = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw ConfigError(path + "/" + key, msg);
  };
  check(c.gamma > 0.0 && c.gamma <= 1.0, "gamma", "must lie in (0, 1]");
  check(c.eps_clip > 0.0, "eps_clip", "must be positive");
  check(c.c_value >= 0.0, "c_v", "must be non-negative");
  check(c.c_entropy >= 0.0, "c_s", "must be non-negative");
  check(c.alpha > 0.0, "alpha", "must be positive");
  check(c.sigma_init > 0.0, "sigma_init", "must be positive");
  check(c.c_bound >= 0.0, "c_b", "must be non-negative");
  check(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
  check(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
  check(c.adam_eps > 0.0, "adam_eps", "must be positive");
  return c;
}

json ppo_json(const ppo::PpoConfig& c) {
  json j = {{"gamma", c.gamma},         {"eps_clip", c.eps_clip},
            {"c_b", c.c_bound},         {"c_v", c.c_value},
            {"c_s", c.c_entropy},       {"alpha", c.alpha},
            {"N_H", c.hidden},          {"N_E", c.episodes},
            {"batch", c.batch},         {"buffer_len", c.buffer_len},
            {"sigma_init", c.sigma_init},
            {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps}};
  if (c.stop_at) j["stop_at"] = *c.stop_at;
  return j;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

json schedule_json(const PotentialSchedule& s) {
  json rows = json::array();
  for (int n = 0; n < s.steps(); ++n) {
    json row = json::array();
    for (int j = 0; j < s.sites(); ++j) row.push_back(s.potentials(n, j));
    rows.push_back(std::move(row));
  }
  return {{"dt", s.dt}, {"P_max", s.p_max}, {"potentials", std::move(rows)}};
}

PotentialSchedule schedule_from(const json& j) {
  PotentialSchedule s;
  s.dt = j.at("dt").get<double>();
  s.p_max = j.at("P_max").get<double>();
  const json& rows = j.at("potentials");
  const auto steps = static_cast<Eigen::Index>(rows.size());
  const auto sites = steps > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  s.potentials.resize(steps, sites);
  for (Eigen::Index n = 0; n < steps; ++n) {
    if (static_cast<Eigen::Index>(rows[n].size()) != sites)
      throw InvalidArg("record schedule rows differ in length");
    for (Eigen::Index k = 0; k < sites; ++k) s.potentials(n, k) = rows[n][k].get<double>();
  }
  return s;
}

std::string csv_number(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  ObjectReader top(doc, "");

  const std::string model = top.string("model");
  if (model == "BH") {
    c.model = ModelKind::BoseHubbard;
  } else if (model == "QPM") {
    c.model = ModelKind::QuantumPhase;
  } else {
    throw ConfigError("/model", "expected \"BH\" or \"QPM\"");
  }

  c.sites = top.bounded_int("L", 1);
  c.interaction = top.number("U", 0.0);
  if (c.interaction < 0.0) throw ConfigError("/U", "must be non-negative");
  c.p_max = top.positive("P_max", 1.0);
  if (c.model == ModelKind::BoseHubbard) {
    if (c.sites < 3) throw ConfigError("/L", "Bose-Hubbard rings need L >= 3");
    c.particles = top.bounded_int("N_p", 1);
  } else {
    if (c.sites < 2) throw ConfigError("/L", "phase-model rings need L >= 2");
    c.dq_max = top.bounded_int("dQ_max", 1);
    c.flux = top.number("flux", 0.0);
  }

  {
    ObjectReader t(top.raw("target"), "/target");
    const std::string kind = t.string("kind");
    try {
      c.target.kind = parse_target_kind(kind);
    } catch (const InvalidArg& e) {
      throw ConfigError("/target/kind", e.what());
    }
    const bool qpm_target = c.target.kind == TargetKind::QpmFluxGroundState;
    if (qpm_target != (c.model == ModelKind::QuantumPhase))
      throw ConfigError("/target/kind", qpm_target ? "qpm_flux targets need model QPM"
                                                   : "model QPM only supports qpm_flux targets");
    if (qpm_target) {
      c.target.flux_index = static_cast<int>(t.integer("flux_index"));
    } else {
      const json& omega = t.raw("omega");
      if (!omega.is_array() || omega.empty())
        throw ConfigError("/target/omega", "expected a non-empty array of integers");
      for (std::size_t i = 0; i < omega.size(); ++i) {
        if (!omega[i].is_number_integer())
          throw ConfigError("/target/omega/" + std::to_string(i), "expected an integer");
        c.target.omega.push_back(omega[i].get<int>());
      }
      c.target.particles = c.particles;
    }
    t.finish();
    try {
      c.target.validate(c.sites);
    } catch (const InvalidArg& e) {
      throw ConfigError(qpm_target ? "/target/flux_index" : "/target/omega", e.what());
    }
  }

  c.measure = parse_measure(top.string("measure", "F"), "/measure");
  if (c.model == ModelKind::QuantumPhase && c.measure != MeasureSelect::F)
    throw ConfigError("/measure", "the phase model only supports F");
  if (c.wants_certification() && c.target.omega.size() < 2)
    throw ConfigError("/measure", "W needs a target with at least two winding numbers");
  {
    const std::string fallback = c.measure == MeasureSelect::W ? "W" : "F";
    const std::string reward = top.string("reward", fallback);
    if (reward == "F" && c.wants_fidelity()) {
      c.reward = MeasureKind::Fidelity;
    } else if (reward == "W" && c.wants_certification()) {
      c.reward = MeasureKind::Certification;
    } else {
      throw ConfigError("/reward", "must name a measure enabled by /measure");
    }
  }

  {
    ObjectReader p(top.raw("protocol"), "/protocol");
    const std::string type = p.string("type");
    if (type == "barrier") {
      c.protocol = ProtocolKind::Barrier;
      c.barrier.height = p.number("P_B");
      c.barrier.speed = p.positive("v");
      c.barrier.total_time = p.positive("T");
      c.barrier.dt = p.number("dt", 0.0);
      c.barrier.start_site = p.bounded_int("start_site", 0, 0);
      if (c.barrier.dt < 0.0) throw ConfigError("/protocol/dt", "must be non-negative");
      if (c.barrier.start_site >= c.sites)
        throw ConfigError("/protocol/start_site", "must be below L");
      const double dt = c.barrier.dt > 0.0 ? c.barrier.dt : default_barrier_sample(c.barrier.speed);
      const double per_hop = (1.0 / c.barrier.speed) / dt;
      if (std::abs(per_hop - std::round(per_hop)) > 1e-9 || std::round(per_hop) < 1.0)
        throw ConfigError("/protocol/dt", "must divide the hop time 1/v");
      if (c.barrier.total_time < dt) throw ConfigError("/protocol/T", "shorter than one sample");
    } else if (type == "fcp") {
      c.protocol = ProtocolKind::Fcp;
      c.fcp.steps = p.bounded_int("N_T", 1);
      c.fcp.total_time = p.positive("T");
    } else if (type == "min_time_scan" || type == "max_fidelity_scan") {
      c.protocol = type == "min_time_scan" ? ProtocolKind::MinTimeScan
                                           : ProtocolKind::MaxFidelityScan;
      c.scan.heights = read_grid(p.raw("P_B"), "/protocol/P_B");
      c.scan.speeds = read_grid(p.raw("v"), "/protocol/v");
      c.scan.time_cap = p.positive("T_max", kDefaultScanTimeCap);
      if (c.protocol == ProtocolKind::MinTimeScan) {
        c.scan.threshold = p.number("threshold");
        if (!(c.scan.threshold >= 0.0 && c.scan.threshold < 1.0))
          throw ConfigError("/protocol/threshold", "must lie in [0, 1)");
      }
      if (c.reward != MeasureKind::Fidelity || !c.wants_fidelity())
        throw ConfigError("/measure", "barrier scans rank by F");
    } else {
      throw ConfigError("/protocol/type",
                        "expected barrier, fcp, min_time_scan or max_fidelity_scan");
    }
    p.finish();
  }

  if (c.protocol == ProtocolKind::Fcp) {
    c.ppo = top.has("ppo") ? parse_ppo(top.raw("ppo"), "/ppo") : ppo::PpoConfig{};
    if (c.ppo.batch > c.ppo.buffer_for(c.fcp.steps))
      throw ConfigError("/ppo/batch", "exceeds the replay buffer length");
  } else if (top.has("ppo")) {
    throw ConfigError("/ppo", "only fcp protocols are trained");
  }

  c.repeats = top.bounded_int("repeats", 1, 1);
  const long long seed = top.integer("seed", 0);
  if (seed < 0) throw ConfigError("/seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.ppo.seed = c.seed;
  top.finish();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ConfigError("line " + std::to_string(line), "syntax error");
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

json canonical_json(const ExperimentConfig& c) {
  json j;
  j["L"] = c.sites;
  j["U"] = c.interaction;
  j["P_max"] = c.p_max;
  json target = {{"kind", to_string(c.target.kind)}};
  if (c.model == ModelKind::BoseHubbard) {
    j["model"] = "BH";
    j["N_p"] = c.particles;
    target["omega"] = c.target.omega;
  } else {
    j["model"] = "QPM";
    j["dQ_max"] = c.dq_max;
    j["flux"] = c.flux;
    target["flux_index"] = c.target.flux_index;
  }
  j["target"] = std::move(target);
  j["measure"] = measure_name(c.measure);
  j["reward"] = measure_name(c.reward);

  json p = {{"type", to_string(c.protocol)}};
  switch (c.protocol) {
    case ProtocolKind::Barrier:
      p["P_B"] = c.barrier.height;
      p["v"] = c.barrier.speed;
      p["T"] = c.barrier.total_time;
      p["dt"] = c.barrier.dt > 0.0 ? c.barrier.dt : default_barrier_sample(c.barrier.speed);
      p["start_site"] = c.barrier.start_site;
      break;
    case ProtocolKind::Fcp:
      p["N_T"] = c.fcp.steps;
      p["T"] = c.fcp.total_time;
      break;
    case ProtocolKind::MinTimeScan:
      p["threshold"] = c.scan.threshold;
      [[fallthrough]];
    case ProtocolKind::MaxFidelityScan:
      p["P_B"] = c.scan.heights;
      p["v"] = c.scan.speeds;
      p["T_max"] = c.scan.time_cap;
      break;
  }
  j["protocol"] = std::move(p);
  if (c.protocol == ProtocolKind::Fcp) j["ppo"] = ppo_json(c.ppo);
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_digest(const ExperimentConfig& config) {
  json j = canonical_json(config);
  j.erase("seed");
  j.erase("repeats");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
  return os.str();
}

json to_json(const RunRecord& r) {
  json j;
  j["format"] = 1;
  j["digest"] = r.digest;
  j["seed"] = r.seed;
  j["experiment"] = r.experiment;
  j["version"] = r.version;
  j["config"] = r.config;
  j["measure"] = r.measure;
  j["best_measure"] = number_or_null(r.best_measure);
  j["best_schedule"] = r.best_schedule ? schedule_json(*r.best_schedule) : json(nullptr);
  j["wall_clock_s"] = r.wall_clock;
  j["episodes"] = r.episodes;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  j["curve_file"] = r.curve_file.empty() ? json(nullptr) : json(r.curve_file);
  if (r.trace) {
    json t = {{"t", r.trace->times}};
    t["F"] = r.trace->fidelity.empty() ? json(nullptr) : json(r.trace->fidelity);
    t["W"] = r.trace->certification.empty() ? json(nullptr) : json(r.trace->certification);
    j["trace"] = std::move(t);
  } else {
    j["trace"] = nullptr;
  }
  if (r.scan) {
    json values = json::array();
    for (const auto& v : r.scan->values) values.push_back(v ? json(*v) : json(nullptr));
    j["scan"] = {{"P_B", r.scan->heights}, {"v", r.scan->speeds}, {"values", std::move(values)}};
  } else {
    j["scan"] = nullptr;
  }
  return j;
}

RunRecord record_from_json(const json& j) {
  try {
    RunRecord r;
    if (j.at("format").get<int>() != 1) throw InvalidArg("unsupported record format");
    r.digest = j.at("digest").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.experiment = j.at("experiment").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.config = j.at("config");
    r.measure = j.at("measure").get<std::string>();
    r.best_measure = number_from(j.at("best_measure"));
    if (!j.at("best_schedule").is_null()) r.best_schedule = schedule_from(j.at("best_schedule"));
    r.wall_clock = j.at("wall_clock_s").get<double>();
    r.episodes = j.at("episodes").get<int>();
    r.aborted = j.at("aborted").get<bool>();
    r.abort_reason = j.at("abort_reason").get<std::string>();
    if (!j.at("curve_file").is_null()) r.curve_file = j.at("curve_file").get<std::string>();
    if (!j.at("trace").is_null()) {
      const json& t = j.at("trace");
      EvaluationTrace tr;
      tr.times = t.at("t").get<std::vector<double>>();
      if (!t.at("F").is_null()) tr.fidelity = t.at("F").get<std::vector<double>>();
      if (!t.at("W").is_null()) tr.certification = t.at("W").get<std::vector<double>>();
      r.trace = std::move(tr);
    }
    if (!j.at("scan").is_null()) {
      const json& s = j.at("scan");
      ScanTable table;
      table.heights = s.at("P_B").get<std::vector<double>>();
      table.speeds = s.at("v").get<std::vector<double>>();
      for (const auto& v : s.at("values"))
        table.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      if (table.values.size() != table.heights.size() * table.speeds.size())
        throw InvalidArg("scan table size mismatch");
      r.scan = std::move(table);
    }
    return r;
  } catch (const json::exception& e) {
    throw InvalidArg(std::string("malformed run record: ") + e.what());
  }
}

RunRecord load_record(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArg("cannot open record " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception&) {
    throw InvalidArg("record is not valid JSON: " + path.string());
  }
  RunRecord r = record_from_json(j);
  r.path = path;
  return r;
}

std::vector<RunRecord> load_records(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("run-", 0) == 0 && e.path().extension() == ".json")
          found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  std::vector<RunRecord> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_record(f));
  return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

RingSystem build_system(const ExperimentConfig& c) {
  try {
    if (c.model == ModelKind::BoseHubbard)
      return RingSystem::bose_hubbard(c.sites, c.particles, c.interaction);
    return RingSystem::quantum_phase(c.sites, c.dq_max, c.interaction, 1.0, c.flux);
  } catch (const DimensionCap& e) {
    throw ConfigError(c.model == ModelKind::BoseHubbard ? "/N_p" : "/dQ_max", e.what());
  }
}

json curve_line(const ppo::EpisodeRecord& e) {
  return {{"episode", e.episode},
          {"reward", number_or_null(e.reward)},
          {"F", number_or_null(e.fidelity)},
          {"W", number_or_null(e.certification)},
          {"best", number_or_null(e.best)},
          {"sigma", number_or_null(e.sigma)},
          {"loss", number_or_null(e.loss_total)},
          {"loss_policy", number_or_null(e.loss_policy)},
          {"loss_value", number_or_null(e.loss_value)},
          {"loss_entropy", number_or_null(e.loss_entropy)},
          {"failed", e.failed}};
}

}  // namespace

RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed,
                     const fs::path& out_dir, int jobs,
                     const std::function<void(const std::string&)>& log) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig c = config;
  c.seed = seed;
  c.ppo.seed = seed;
  c.repeats = 1;

  RunRecord r;
  r.digest = config_digest(c);
  r.seed = seed;
  r.experiment = to_string(c.protocol);
  r.version = RINGDRIVE_VERSION;
  r.config = canonical_json(c);
  r.measure = measure_name(c.reward);

  const fs::path dir = out_dir / r.digest;
  fs::create_directories(dir);
  const std::string stem = "run-" + std::to_string(seed);

  const RingSystem system = build_system(c);
  const StateVector initial = system.undriven_ground_state().state;
  const Objective objective =
      make_objective(system, c.target, c.wants_fidelity(), c.wants_certification());

  switch (c.protocol) {
    case ProtocolKind::Barrier: {
      const double dt =
          c.barrier.dt > 0.0 ? c.barrier.dt : default_barrier_sample(c.barrier.speed);
      PotentialSchedule s = barrier_schedule(c.barrier.height, c.barrier.speed,
                                             c.barrier.total_time, c.sites, dt,
                                             c.barrier.start_site);
      EvaluationTrace trace = evaluate(s, system, initial, objective);
      const auto& series =
          c.reward == MeasureKind::Fidelity ? trace.fidelity : trace.certification;
      r.best_measure = *std::max_element(series.begin(), series.end());
      trace.final_state = StateVector{};
      r.trace = std::move(trace);
      r.best_schedule = std::move(s);
      break;
    }
    case ProtocolKind::MinTimeScan:
    case ProtocolKind::MaxFidelityScan: {
      const bool min_time = c.protocol == ProtocolKind::MinTimeScan;
      ScanTable table =
          min_time ? min_time_scan(c.scan.heights, c.scan.speeds, c.scan.threshold, system,
                                   initial, objective, c.scan.time_cap, jobs)
                   : barrier_sweep(c.scan.heights, c.scan.speeds, system, initial, objective,
                                   c.scan.time_cap, jobs);
      double best = std::numeric_limits<double>::quiet_NaN();
      for (const auto& v : table.values) {
        if (!v) continue;
        if (std::isnan(best) || (min_time ? *v < best : *v > best)) best = *v;
      }
      r.measure = min_time ? "T_min" : "F";
      r.best_measure = best;
      r.scan = std::move(table);
      break;
    }
    case ProtocolKind::Fcp: {
      ppo::ControlEnv env{system, initial, objective, c.reward,
                          c.fcp.steps, c.fcp.total_time, c.p_max};
      r.curve_file = "curve-" + std::to_string(seed) + ".jsonl";
      std::ofstream curve(dir / r.curve_file, std::ios::trunc);
      if (!curve) throw Error("cannot write " + (dir / r.curve_file).string());
      ppo::Trainer trainer(std::move(env), c.ppo);
      const int every = std::max(1, c.ppo.episodes / 20);
      trainer.run_all([&](const ppo::EpisodeRecord& e) {
        curve << curve_line(e).dump() << '\n';
        curve.flush();
        if (log && (e.episode + 1) % every == 0)
          log("seed " + std::to_string(seed) + " episode " + std::to_string(e.episode + 1) +
              " best " + csv_number(e.best) + " sigma " + csv_number(e.sigma));
      });
      const ppo::TrainLog& tl = trainer.log();
      r.best_measure = tl.best_measure;
      r.best_schedule = tl.best_schedule;
      r.episodes = trainer.completed();
      r.aborted = tl.aborted;
      r.abort_reason = tl.abort_reason;
      break;
    }
  }

  r.wall_clock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.path = dir / (stem + ".json");
  write_atomic(r.path, to_json(r).dump(1) + "\n");
  if (log) log("wrote " + r.path.string());
  return r;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const RunOptions& options) {
  const int repeats = options.repeats.value_or(config.repeats);
  if (repeats < 1) throw ConfigError("/repeats", "must be at least 1");
  const std::uint64_t base = options.seed.value_or(config.seed);
  const int jobs = std::max(1, options.jobs);

  std::mutex log_mutex;
  std::function<void(const std::string&)> log;
  if (options.log)
    log = [&](const std::string& s) {
      std::lock_guard<std::mutex> lock(log_mutex);
      options.log(s);
    };

  std::vector<RunRecord> records(static_cast<std::size_t>(repeats));
  if (repeats == 1 || jobs == 1) {
    for (int i = 0; i < repeats; ++i)
      records[i] = run_single(config, base + static_cast<std::uint64_t>(i), options.out_dir,
                              repeats == 1 ? jobs : 1, log);
    return records;
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(jobs, repeats); ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < repeats; i = next++) {
        try {
          records[i] = run_single(config, base + static_cast<std::uint64_t>(i),
                                  options.out_dir, 1, log);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return records;
}

std::vector<StatsRow> summarize(const std::vector<RunRecord>& records, bool allow_mixed) {
  if (records.empty()) throw ConfigError("records", "no run records given");
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[r.digest].push_back(&r);
  if (groups.size() > 1 && !allow_mixed)
    throw ConfigError("digest", "records mix " + std::to_string(groups.size()) +
                                    " config digests; pass --allow-mixed to summarize each");

  std::vector<StatsRow> rows;
  for (const auto& [digest, group] : groups) {
    StatsRow row;
    row.digest = digest;
    row.measure = group.front()->measure;
    row.count = group.size();
    row.min = std::numeric_limits<double>::infinity();
    row.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t finite = 0;
    for (const RunRecord* r : group) {
      if (!std::isfinite(r->best_measure)) continue;
      row.min = std::min(row.min, r->best_measure);
      row.max = std::max(row.max, r->best_measure);
      sum += r->best_measure;
      ++finite;
    }
    if (finite == 0) {
      row.min = row.max = row.mean = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.mean = sum / static_cast<double>(finite);
      // keep min <= mean <= max despite rounding in the sum
      row.mean = std::clamp(row.mean, row.min, row.max);
    }
    rows.push_back(row);
  }
  return rows;
}

ExportKind parse_export_kind(const std::string& name) {
  if (name == "trace") return ExportKind::Trace;
  if (name == "scan") return ExportKind::Scan;
  if (name == "curve") return ExportKind::Curve;
  if (name == "protocol") return ExportKind::Protocol;
  throw ConfigError("kind", "unknown export kind '" + name +
                                "' (expected trace, scan, curve or protocol)");
}

std::string export_csv(const RunRecord& r, ExportKind kind) {
  std::ostringstream os;
  switch (kind) {
    case ExportKind::Trace: {
      if (!r.trace) throw InvalidArg("record has no trace: " + r.path.string());
      const auto& t = *r.trace;
      os << "t,F,W\n";
      for (std::size_t i = 0; i < t.times.size(); ++i) {
        os << csv_number(t.times[i]) << ','
           << (i < t.fidelity.size() ? csv_number(t.fidelity[i]) : "") << ','
           << (i < t.certification.size() ? csv_number(t.certification[i]) : "") << '\n';
      }
      break;
    }
    case ExportKind::Scan: {
      if (!r.scan) throw InvalidArg("record has no scan table: " + r.path.string());
      os << "P_B,v,T_min_or_maxF\n";
      for (std::size_t h = 0; h < r.scan->heights.size(); ++h)
        for (std::size_t s = 0; s < r.scan->speeds.size(); ++s) {
          const auto v = r.scan->at(h, s);
          os << csv_number(r.scan->heights[h]) << ',' << csv_number(r.scan->speeds[s]) << ','
             << (v ? csv_number(*v) : "") << '\n';
        }
      break;
    }
    case ExportKind::Curve: {
      if (r.curve_file.empty()) throw InvalidArg("record has no learning curve: " + r.path.string());
      const fs::path file = r.path.parent_path() / r.curve_file;
      std::ifstream is(file);
      if (!is) throw InvalidArg("cannot open learning curve " + file.string());
      os << "episode,reward,F,W,best,sigma\n";
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        json e;
        try {
          e = json::parse(line);
        } catch (const json::exception&) {
          break;  // a torn final line from an interrupted run
        }
        os << e.at("episode").get<int>();
        for (const char* key : {"reward", "F", "W", "best", "sigma"})
          os << ',' << csv_number(number_from(e.at(key)));
        os << '\n';
      }
      break;
    }
    case ExportKind::Protocol: {
      if (!r.best_schedule) throw InvalidArg("record has no protocol: " + r.path.string());
      const auto& s = *r.best_schedule;
      os << "step,t_start";
      for (int j = 1; j <= s.sites(); ++j) os << ",P_" << j;
      os << '\n';
      for (int n = 0; n < s.steps(); ++n) {
        os << n << ',' << csv_number(n * s.dt);
        for (int j = 0; j < s.sites(); ++j) os << ',' << csv_number(s.potentials(n, j));
        os << '\n';
      }
      break;
    }
  }
  return os.str();
}

}  // namespace ringdrive::experiment
