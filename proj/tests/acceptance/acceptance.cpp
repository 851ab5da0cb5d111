// Acceptance checks; one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ppo_fixtures.hpp"
#include "ringdrive/experiment.hpp"
#include "ringdrive/hamiltonian.hpp"
#include "ringdrive/propagator.hpp"
#include "ringdrive/protocol.hpp"
#include "ringdrive/targets.hpp"

using namespace ringdrive;
using namespace ringdrive::experiment;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "ringdrive-acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

struct CurveRow {
  double reward, f, w, best;
};

std::vector<CurveRow> read_curve(const RunRecord& r) {
  std::vector<CurveRow> rows;
  std::ifstream is(r.path.parent_path() / r.curve_file);
  std::string line;
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    rows.push_back({num(j["reward"]), num(j["F"]), num(j["W"]), num(j["best"])});
  }
  return rows;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(ra.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

ExperimentConfig config(const std::string& name) {
  return load_config(fs::path(RINGDRIVE_CONFIGS) / name);
}

std::vector<RunRecord> run_config(const ExperimentConfig& c, const std::string& tag) {
  RunOptions opts;
  opts.out_dir = work_dir() / tag;
  return run_experiment(c, opts);
}

// C6 runs feed C8 as well.
std::vector<RunRecord> c6_records;

Outcome spectrum_law() {
  Outcome o;
  double worst = 0;
  for (int l = 3; l <= 12; ++l) {
    const auto sys = RingSystem::bose_hubbard(l, 1, 1.0);
    const Eigen::VectorXd ev = spectrum(sys.hamiltonian(std::vector<double>(l, 0.0)));
    std::vector<double> expect;
    for (int k = 0; k < l; ++k) expect.push_back(-2.0 * std::cos(2.0 * std::numbers::pi * k / l));
    std::sort(expect.begin(), expect.end());
    for (int k = 0; k < l; ++k) worst = std::max(worst, std::abs(ev(k) - expect[k]));
  }
  o.pass = worst <= 1e-10;
  o.detail = "max deviation " + fmt(worst) + " over L=3..12";
  return o;
}

Outcome certification_closed_forms() {
  Outcome o;
  double worst = 0;
  double noon22 = 0;
  for (int np = 1; np <= 4; ++np)
    for (int nc = 2; nc <= 3; ++nc) {
      const auto b = build_fock_basis(6, np);
      std::vector<int> omega(nc);
      for (int i = 0; i < nc; ++i) omega[i] = i;
      const auto modes = mode_squares(b, omega);
      TargetSpec t;
      t.omega = omega;
      t.particles = np;
      t.kind = TargetKind::EntangledSuperposition;
      const double w_es = certification_W(make_target(t, b), modes, np);
      t.kind = TargetKind::ProductSuperposition;
      const double w_ps = certification_W(make_target(t, b), modes, np);
      const double expect = std::pow(double(np + nc - 1) / (nc * np), nc);
      worst = std::max({worst, std::abs(w_es - 1.0), std::abs(w_ps - expect)});
      if (np == 2 && nc == 2) noon22 = w_ps;
    }
  o.pass = worst <= 1e-10 && std::abs(noon22 - 9.0 / 16.0) <= 1e-12;
  o.detail = "max deviation " + fmt(worst) + ", W_PS(2,2) = " + fmt(noon22, 17);
  return o;
}

Outcome barrier_reproduction() {
  Outcome o;
  const auto c = config("barrier_np1.json");
  const auto rec = run_config(c, "c3-barrier").front();
  double t_reach = -1;
  for (std::size_t i = 0; i < rec.trace->times.size(); ++i)
    if (rec.trace->fidelity[i] >= 0.9) {
      t_reach = rec.trace->times[i];
      break;
    }
  const bool reached = t_reach >= 0 && t_reach <= 25.0;

  const auto sweep = run_config(config("barrier_speed_scan.json"), "c3-sweep").front();
  const auto& table = *sweep.scan;
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.values.size(); ++i)
    if (*table.values[i] > *table.values[best]) best = i;
  const double v_best = table.speeds[best % table.speeds.size()];
  const double pb_best = table.heights[best / table.speeds.size()];
  double spacing = table.speeds.size() > 1 ? table.speeds[1] - table.speeds[0] : 0;
  const bool near_half = std::abs(v_best - 0.5) <= 0.15 + 1e-12 && std::abs(spacing - 0.05) < 1e-9;

  o.pass = reached && near_half;
  o.detail = "F >= 0.9 first at T = " + fmt(t_reach) + ", max F " + fmt(rec.best_measure) +
             "; sweep argmax v = " + fmt(v_best) + " (P_B = " + fmt(pb_best) + ", F = " +
             fmt(*table.values[best]) + ")";
  return o;
}

Outcome propagator_correctness() {
  Outcome o;
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> u(0.0, 3.0), tdist(0.0, 5.0);
  PropagatorOptions krylov;
  krylov.dense_limit = 0;
  double worst = 0, drift = 0;
  Eigen::Index largest = 0;
  const std::vector<std::pair<int, int>> bh{{12, 1}, {8, 2}, {6, 3}, {10, 2}, {5, 4}, {4, 5}};
  const std::vector<std::pair<int, int>> qpm{{4, 2}, {5, 1}, {3, 4}, {6, 1}, {4, 3}};
  for (int trial = 0; trial < 50; ++trial) {
    HermitianOperator h;
    if (trial % 2 == 0) {
      const auto [l, n] = bh[trial / 2 % bh.size()];
      h = bh_hamiltonian(build_fock_basis(l, n), 1.0, u(g), oracle::random_potentials(l, 2.0, g));
    } else {
      const auto [l, dq] = qpm[trial / 2 % qpm.size()];
      h = qpm_hamiltonian(build_charge_basis(l, dq), 1.0, u(g), oracle::random_potentials(l, 2.0, g), u(g));
    }
    largest = std::max(largest, h.dim());
    const StateVector psi{h.basis, oracle::random_state(h.dim(), g)};
    const double dt = tdist(g);
    const Eigen::VectorXcd ref = oracle::expm_apply(h.dense(), psi.amplitudes, dt);
    // alternate between the dense and the Krylov path
    const auto out = evolve(psi, h, dt, trial % 4 < 2 ? PropagatorOptions{} : krylov);
    worst = std::max(worst, (out.amplitudes - ref).norm());
    drift = std::max(drift, std::abs(out.norm() - 1.0));
  }
  o.pass = worst <= 1e-9 && drift <= 1e-10 && largest <= 400;
  o.detail = "max error " + fmt(worst) + ", norm drift " + fmt(drift) + ", largest dim " +
             std::to_string(largest);
  return o;
}

Outcome gradient_keystone() {
  Outcome o;
  double worst = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed)
    worst = std::max(worst, fixture::gradient_check(seed).rel_error);
  o.pass = worst < 1e-4;
  o.detail = "max relative error " + fmt(worst) + " over 20 nets";
  return o;
}

Outcome desk_scale_learning() {
  Outcome o;
  const auto c = config("fcp_np1_superposition.json");
  c6_records = run_config(c, "c6");
  bool any = false, all_improve = true;
  std::string per;
  for (const auto& r : c6_records) {
    const auto curve = read_curve(r);
    double base = 0;
    const std::size_t n = std::min<std::size_t>(100, curve.size());
    for (std::size_t i = 0; i < n; ++i) base += curve[i].reward / n;
    any |= r.best_measure >= 0.95;
    all_improve &= !r.aborted && r.best_measure - base >= 0.2;
    per += " seed " + std::to_string(r.seed) + ": best " + fmt(r.best_measure) + " baseline " +
           fmt(base) + ";";
  }
  o.pass = any && all_improve && c6_records.size() == 3;
  o.detail = std::to_string(c.ppo.episodes) + " episodes," + per;
  return o;
}

Outcome fcp_beats_barrier() {
  Outcome o;
  auto c = config("fcp_np1_k1_T8.json");
  const double t = c.fcp.total_time;
  c.repeats = 2;
  const auto records = run_config(c, "c7");

  const auto sys = RingSystem::bose_hubbard(c.sites, c.particles, c.interaction);
  const auto gs = sys.undriven_ground_state().state;
  const auto obj = make_objective(sys, c.target, true, false);
  const double v = 0.53;
  const auto s = barrier_schedule(2.0, v, t, c.sites, default_barrier_sample(v));
  const double barrier_f = evaluate(s, sys, gs, obj).max_fidelity();

  bool all = true;
  std::string per;
  for (const auto& r : records) {
    all &= !r.aborted && r.best_measure > barrier_f;
    per += " seed " + std::to_string(r.seed) + " FCP F " + fmt(r.best_measure) + ";";
  }
  o.pass = all;
  o.detail = "T = " + fmt(t) + ": barrier max F " + fmt(barrier_f) + ";" + per;
  return o;
}

Outcome w_f_cotrend() {
  Outcome o;
  if (c6_records.empty()) {
    o.pass = false;
    o.detail = "no training logs";
    return o;
  }
  double worst = 1;
  for (const auto& r : c6_records) {
    std::vector<double> f, w;
    for (const auto& row : read_curve(r))
      if (std::isfinite(row.f) && std::isfinite(row.w)) f.push_back(row.f), w.push_back(row.w);
    worst = std::min(worst, spearman(f, w));
  }
  const auto c = config("fcp_np1_superposition.json");
  const auto sys = RingSystem::bose_hubbard(c.sites, c.particles, c.interaction);
  const auto gs = sys.undriven_ground_state().state;
  const auto obj = make_objective(sys, c.target, true, true);
  const double w0 = obj.measure(MeasureKind::Certification, gs);
  const double f0 = obj.measure(MeasureKind::Fidelity, gs);
  o.pass = worst >= 0.8 && std::abs(w0) <= 1e-12;
  o.detail = "min Spearman(F, W) " + fmt(worst) + " over " + std::to_string(c6_records.size()) +
             " logs; initial W " + fmt(w0) + ", initial F " + fmt(f0);
  return o;
}

Outcome determinism_and_statistics() {
  Outcome o;
  auto small = config("fcp_np1_superposition.json");
  small.ppo.episodes = 1500;
  small.repeats = 1;
  const auto a = run_config(small, "c9-a").front();
  const auto b = run_config(small, "c9-b").front();
  const bool identical = read_file(a.path.parent_path() / a.curve_file) ==
                             read_file(b.path.parent_path() / b.curve_file) &&
                         a.best_measure == b.best_measure;

  const auto tight = config("noon_np2_omega01.json");
  const auto loose = config("noon_np2_omega-11.json");
  const auto ra = run_config(tight, "c9-omega01");
  const auto rb = run_config(loose, "c9-omega-11");
  const auto sa = summarize(load_records({work_dir() / "c9-omega01"}), false).front();
  const auto sb = summarize(load_records({work_dir() / "c9-omega-11"}), false).front();
  const bool ordered_stats = sa.min <= sa.mean && sa.mean <= sa.max && sb.min <= sb.mean &&
                             sb.mean <= sb.max && sa.count >= 5 && sb.count >= 5;
  const double spread_a = sa.max - sa.min, spread_b = sb.max - sb.min;
  o.pass = identical && ordered_stats && spread_a < spread_b;
  o.detail = std::string(identical ? "curves bit-identical" : "curves differ") +
             "; W over " + std::to_string(sa.count) + " seeds {0,1}: min " + fmt(sa.min) +
             " mean " + fmt(sa.mean) + " max " + fmt(sa.max) + " spread " + fmt(spread_a) +
             "; {-1,1}: min " + fmt(sb.min) + " mean " + fmt(sb.mean) + " max " + fmt(sb.max) +
             " spread " + fmt(spread_b);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "spectrum law", spectrum_law},
      {2, "certification closed forms", certification_closed_forms},
      {3, "barrier reproduction", barrier_reproduction},
      {4, "propagator correctness", propagator_correctness},
      {5, "gradient keystone", gradient_keystone},
      {6, "desk-scale learning", desk_scale_learning},
      {7, "FCP beats barrier", fcp_beats_barrier},
      {8, "W-F co-trend", w_f_cotrend},
      {9, "determinism and statistics", determinism_and_statistics},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  fs::remove_all(work_dir());
  return failed == 0 ? 0 : 1;
}
