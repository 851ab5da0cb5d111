#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ringdrive/experiment.hpp"

namespace fs = std::filesystem;
using namespace ringdrive;
using namespace ringdrive::experiment;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

fs::path default_out() {
  const char* env = std::getenv("RINGDRIVE_OUT");
  return env && *env ? fs::path(env) : fs::path("results");
}

int cmd_validate(const std::string& config_path) {
  const ExperimentConfig c = load_config(config_path);
  std::cout << "digest " << config_digest(c) << "\n" << canonical_json(c).dump(2) << "\n";
  return kOk;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<int> repeats, const fs::path& out, int jobs, bool quiet) {
  const ExperimentConfig c = load_config(config_path);
  RunOptions opts;
  opts.out_dir = out;
  opts.seed = seed;
  opts.repeats = repeats;
  opts.jobs = jobs;
  if (!quiet) opts.log = [](const std::string& s) { std::cerr << s << "\n"; };
  const auto records = run_experiment(c, opts);
  bool aborted = false;
  for (const auto& r : records) {
    std::cout << r.path.string() << " seed " << r.seed << " best " << r.measure << " "
              << std::setprecision(10) << r.best_measure << "\n";
    if (r.aborted) {
      std::cerr << "training aborted: " << r.abort_reason << "\n";
      aborted = true;
    }
  }
  return aborted ? kNumericalFailure : kOk;
}

int cmd_stats(const std::vector<std::string>& inputs, bool allow_mixed) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto rows = summarize(load_records(paths), allow_mixed);
  std::cout << "digest,measure,count,min,max,mean\n" << std::setprecision(10);
  for (const auto& r : rows)
    std::cout << r.digest << ',' << r.measure << ',' << r.count << ',' << r.min << ','
              << r.max << ',' << r.mean << "\n";
  return kOk;
}

int cmd_export(const std::vector<std::string>& inputs, const std::string& kind_name,
               const std::optional<fs::path>& out) {
  const ExportKind kind = parse_export_kind(kind_name);
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto records = load_records(paths);
  int written = 0;
  for (const auto& r : records) {
    std::string csv;
    try {
      csv = export_csv(r, kind);
    } catch (const InvalidArg& e) {
      if (records.size() == 1) throw;
      std::cerr << "skipped: " << e.what() << "\n";
      continue;
    }
    const fs::path dir = out ? *out : r.path.parent_path();
    const fs::path file = dir / (r.path.stem().string() + "-" + kind_name + ".csv");
    write_atomic(file, csv);
    std::cout << file.string() << "\n";
    ++written;
  }
  if (written == 0) throw InvalidArg("no record carries " + kind_name + " data");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistent-current state preparation on ring lattices"};
  app.set_version_flag("--version", std::string(RINGDRIVE_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::string out_dir;
  int jobs = 1;
  bool quiet = false;
  bool allow_mixed = false;
  std::string kind;
  std::vector<std::string> inputs;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Override the base seed");
  run->add_option("--repeats", repeats, "Override the repeat count")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (default $RINGDRIVE_OUT or ./results)");
  run->add_option("--jobs", jobs, "Concurrent repeats or scan workers")->check(CLI::PositiveNumber);
  run->add_flag("--quiet", quiet, "Suppress progress messages");

  auto* validate = app.add_subcommand("validate", "Check a config and print its digest");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* stats = app.add_subcommand("stats", "Min, max and mean of best measures per config");
  stats->add_option("records", inputs, "Run records or directories")->required();
  stats->add_flag("--allow-mixed", allow_mixed, "Summarize records of different configs");

  auto* exp = app.add_subcommand("export", "Write CSV tables from run records");
  exp->add_option("--kind", kind, "trace, scan, curve or protocol")->required();
  exp->add_option("records", inputs, "Run records or directories")->required();
  exp->add_option("--out", out_dir, "Directory for the CSV files (default: next to records)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*validate) return cmd_validate(config_path);
    if (*run)
      return cmd_run(config_path, seed, repeats, out_dir.empty() ? default_out() : fs::path(out_dir),
                     jobs, quiet);
    if (*stats) return cmd_stats(inputs, allow_mixed);
    if (*exp)
      return cmd_export(inputs, kind,
                        out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConvergenceFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const NonFinite& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const InvalidArg& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
