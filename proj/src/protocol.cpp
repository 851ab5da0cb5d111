#include "ringdrive/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "ringdrive/errors.hpp"

namespace ringdrive {

namespace {

void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ScanTable run_grid(const std::vector<double>& heights,
                   const std::vector<double>& speeds, const RingSystem& system,
                   const StateVector& initial, const Objective& objective,
                   double time_cap, int jobs,
                   const std::function<std::optional<double>(const EvaluationTrace&)>& reduce) {
  if (!objective.has_fidelity()) throw InvalidArg("barrier scans need a fidelity target");
  ScanTable table{heights, speeds, std::vector<std::optional<double>>(heights.size() * speeds.size())};
  parallel_for(table.values.size(), jobs, [&](std::size_t i) {
    const double height = heights[i / speeds.size()];
    const double speed = speeds[i % speeds.size()];
    const auto schedule = barrier_schedule(height, speed, time_cap, system.sites(),
                                           default_barrier_sample(speed));
    table.values[i] = reduce(evaluate(schedule, system, initial, objective));
  });
  return table;
}

}  // namespace

void PotentialSchedule::validate() const {
  if (!(dt > 0.0)) throw InvalidArg("schedule step length must be positive");
  if (steps() < 1) throw InvalidArg("schedule needs at least one step");
  const double bound = potentials.cwiseAbs().maxCoeff();
  if (bound > p_max * (1.0 + 1e-12))
    throw InvalidArg("schedule potential exceeds P_max");
}

PotentialSchedule PotentialSchedule::refined(int factor) const {
  if (factor < 1) throw InvalidArg("refinement factor must be positive");
  PotentialSchedule out{dt / factor, p_max,
                        Eigen::MatrixXd(steps() * factor, sites())};
  for (int n = 0; n < steps(); ++n)
    for (int m = 0; m < factor; ++m) out.potentials.row(n * factor + m) = potentials.row(n);
  return out;
}

PotentialSchedule PotentialSchedule::rotated(int shift) const {
  PotentialSchedule out = *this;
  const int sites = this->sites();
  for (int j = 0; j < sites; ++j)
    out.potentials.col(((j + shift) % sites + sites) % sites) = potentials.col(j);
  return out;
}

PotentialSchedule barrier_schedule(double height, double speed, double total_time,
                                   int sites, double dt_sample, int start_site) {
  if (!(speed > 0.0)) throw InvalidArg("barrier speed must be positive");
  if (height < 0.0) throw InvalidArg("barrier height must be non-negative");
  if (!(dt_sample > 0.0)) throw InvalidArg("sample step must be positive");
  if (sites < 1) throw InvalidArg("barrier needs at least one site");
  const double hop_time = 1.0 / speed;
  const long per_hop = std::lround(hop_time / dt_sample);
  if (per_hop < 1 || std::abs(per_hop * dt_sample - hop_time) > 1e-9)
    throw InvalidArg("sample step must divide the barrier hop time 1/v");

  const long steps = static_cast<long>(std::floor(total_time / dt_sample + 1e-9));
  if (steps < 1) throw InvalidArg("protocol shorter than one sample step");
  PotentialSchedule s{dt_sample, height, Eigen::MatrixXd::Zero(steps, sites)};
  for (long n = 0; n < steps; ++n) {
    const long site = (start_site + n / per_hop) % sites;
    s.potentials(n, site) = height;
  }
  return s;
}

double EvaluationTrace::max_fidelity() const {
  return fidelity.empty() ? 0.0 : *std::max_element(fidelity.begin(), fidelity.end());
}

EvaluationTrace evaluate(const PotentialSchedule& schedule, const RingSystem& system,
                         const StateVector& initial, const Objective& objective) {
  if (schedule.sites() != system.sites())
    throw InvalidArg("schedule and system disagree on the site count");
  require_same_basis(initial.basis, system.tag(), "evaluate");

  EvaluationTrace trace;
  trace.times.reserve(schedule.steps() + 1);
  auto record = [&](double t, const StateVector& psi) {
    trace.times.push_back(t);
    if (objective.has_fidelity())
      trace.fidelity.push_back(objective.measure(MeasureKind::Fidelity, psi));
    if (objective.has_certification())
      trace.certification.push_back(objective.measure(MeasureKind::Certification, psi));
  };

  StateVector psi = initial;
  record(0.0, psi);
  std::vector<double> row(schedule.sites());
  for (int n = 0; n < schedule.steps(); ++n) {
    for (int j = 0; j < schedule.sites(); ++j) row[j] = schedule.potentials(n, j);
    psi = evolve(psi, system.hamiltonian(row), schedule.dt, system.propagator());
    record(schedule.dt * (n + 1), psi);
  }
  trace.final_state = std::move(psi);
  return trace;
}

ScanTable min_time_scan(const std::vector<double>& heights,
                        const std::vector<double>& speeds, double threshold,
                        const RingSystem& system, const StateVector& initial,
                        const Objective& objective, double time_cap, int jobs) {
  if (threshold < 0.0 || threshold >= 1.0)
    throw InvalidArg("fidelity threshold must lie in [0, 1)");
  return run_grid(heights, speeds, system, initial, objective, time_cap, jobs,
                  [threshold](const EvaluationTrace& tr) -> std::optional<double> {
                    for (std::size_t i = 0; i < tr.times.size(); ++i)
                      if (tr.fidelity[i] >= threshold) return tr.times[i];
                    return std::nullopt;
                  });
}

ScanTable barrier_sweep(const std::vector<double>& heights,
                        const std::vector<double>& speeds, const RingSystem& system,
                        const StateVector& initial, const Objective& objective,
                        double time_cap, int jobs) {
  return run_grid(heights, speeds, system, initial, objective, time_cap, jobs,
                  [](const EvaluationTrace& tr) -> std::optional<double> {
                    return tr.max_fidelity();
                  });
}

StateVector rotate_state(const RingSystem& system, const StateVector& psi, int shift) {
  require_same_basis(psi.basis, system.tag(), "rotate_state");
  const auto& basis = system.model() == ModelKind::BoseHubbard
                          ? static_cast<const ConfigurationBasis&>(system.fock())
                          : static_cast<const ConfigurationBasis&>(system.charge());
  const int sites = system.sites();
  StateVector out{psi.basis, Eigen::VectorXcd::Zero(psi.dim())};
  Configuration moved(sites);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Configuration& c = basis.state(i);
    for (int j = 0; j < sites; ++j) moved[((j + shift) % sites + sites) % sites] = c[j];
    out.amplitudes(basis.find(moved)) = psi.amplitudes(i);
  }
  return out;
}

}  // namespace ringdrive
