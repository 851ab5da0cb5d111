#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringdrive/errors.hpp"
#include "ringdrive/ppo/trainer.hpp"
#include "ringdrive/protocol.hpp"
#include "ringdrive/system.hpp"
#include "ringdrive/targets.hpp"

namespace ringdrive::experiment {

using nlohmann::json;

// Rejected configuration. `field` is a JSON pointer such as "/target/omega",
// or "line N" for syntax errors.
class ConfigError : public InvalidArg {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ProtocolKind { Barrier, Fcp, MinTimeScan, MaxFidelityScan };
enum class MeasureSelect { F, W, Both };

std::string to_string(ProtocolKind kind);

struct BarrierProtocol {
  double height = 0.0;  // P_B
  double speed = 0.0;   // v, hops per unit time
  double total_time = 0.0;
  double dt = 0.0;      // 0 selects default_barrier_sample(speed)
  int start_site = 0;
};

struct FcpProtocol {
  int steps = 1;
  double total_time = 1.0;
};

struct ScanProtocol {
  std::vector<double> heights;
  std::vector<double> speeds;
  double threshold = 0.9;  // min-time scans only
  double time_cap = kDefaultScanTimeCap;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::BoseHubbard;
  int sites = 0;
  int particles = 0;  // Bose-Hubbard
  int dq_max = 0;     // phase model
  double interaction = 0.0;
  double flux = 0.0;  // phase model, radians
  double p_max = 1.0;
  TargetSpec target;
  ProtocolKind protocol = ProtocolKind::Barrier;
  BarrierProtocol barrier;
  FcpProtocol fcp;
  ScanProtocol scan;
  MeasureSelect measure = MeasureSelect::F;
  MeasureKind reward = MeasureKind::Fidelity;
  ppo::PpoConfig ppo;
  int repeats = 1;
  std::uint64_t seed = 0;

  bool wants_fidelity() const { return measure != MeasureSelect::W; }
  bool wants_certification() const { return measure != MeasureSelect::F; }
};

// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved form with every default spelled out; keys sorted.
json canonical_json(const ExperimentConfig& config);

// 16 hex digits of FNV-1a over the canonical form without seed and repeats.
std::string config_digest(const ExperimentConfig& config);

std::uint64_t fnv1a64(const std::string& bytes);

struct RunRecord {
  std::string digest;
  std::uint64_t seed = 0;
  std::string experiment;
  std::string version;
  json config;
  std::string measure;  // "F" or "W"
  double best_measure = 0.0;
  std::optional<PotentialSchedule> best_schedule;
  double wall_clock = 0.0;
  int episodes = 0;
  bool aborted = false;
  std::string abort_reason;
  std::string curve_file;  // relative to the record, empty when none
  std::optional<EvaluationTrace> trace;
  std::optional<ScanTable> scan;
  std::filesystem::path path;  // where the record was read from or written to
};

json to_json(const RunRecord& record);
RunRecord record_from_json(const json& doc);
RunRecord load_record(const std::filesystem::path& path);

// Files and directories (searched recursively for run-*.json).
std::vector<RunRecord> load_records(const std::vector<std::filesystem::path>& inputs);

struct RunOptions {
  std::filesystem::path out_dir = "results";
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  int jobs = 1;
  std::function<void(const std::string&)> log;
};

// Runs one repeat and writes <out>/<digest>/run-<seed>.json (plus the
// curve file for trainings).
RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed,
                     const std::filesystem::path& out_dir, int jobs = 1,
                     const std::function<void(const std::string&)>& log = {});

// Runs every repeat with seeds seed, seed+1, ...
std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const RunOptions& options);

struct StatsRow {
  std::string digest;
  std::string measure;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

// One row per digest. Throws ConfigError when digests differ and
// `allow_mixed` is false.
std::vector<StatsRow> summarize(const std::vector<RunRecord>& records, bool allow_mixed);

enum class ExportKind { Trace, Scan, Curve, Protocol };
ExportKind parse_export_kind(const std::string& name);

// CSV with a header row. Throws InvalidArg when the record lacks the data.
std::string export_csv(const RunRecord& record, ExportKind kind);

// Writes `content` to `path` through a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ringdrive::experiment
