#pragma once

#include <optional>
#include <vector>

#include "ringdrive/system.hpp"

namespace ringdrive {

// Piecewise-constant drive: row n holds the L site potentials applied
// during [n dt, (n+1) dt).
struct PotentialSchedule {
  double dt = 0.0;
  double p_max = 0.0;
  Eigen::MatrixXd potentials;  // steps x sites

  int steps() const { return static_cast<int>(potentials.rows()); }
  int sites() const { return static_cast<int>(potentials.cols()); }
  double total_time() const { return dt * steps(); }
  void validate() const;

  // Same drive with every step split into `factor` equal substeps.
  PotentialSchedule refined(int factor) const;
  // Potentials shifted by `shift` sites (site j -> j + shift mod L).
  PotentialSchedule rotated(int shift) const;
};

// Single-site barrier of height `height` hopping one site forward every
// 1/speed, sampled with step dt_sample (which must divide 1/speed).
PotentialSchedule barrier_schedule(double height, double speed, double total_time,
                                   int sites, double dt_sample,
                                   int start_site = 0);

// Default sampling: four samples per barrier hop.
inline double default_barrier_sample(double speed) { return 0.25 / speed; }

struct EvaluationTrace {
  std::vector<double> times;          // step boundaries, 0 .. T
  std::vector<double> fidelity;       // empty when not tracked
  std::vector<double> certification;  // empty when not tracked
  StateVector final_state;

  double final_fidelity() const { return fidelity.empty() ? 0.0 : fidelity.back(); }
  double max_fidelity() const;
};

// Rebuilds H for every step and propagates exactly; records the tracked
// measures at every boundary including t = 0.
EvaluationTrace evaluate(const PotentialSchedule& schedule, const RingSystem& system,
                         const StateVector& initial, const Objective& objective);

// Grid of barrier runs; values are row-major over (height, speed).
struct ScanTable {
  std::vector<double> heights;
  std::vector<double> speeds;
  std::vector<std::optional<double>> values;

  std::optional<double> at(std::size_t h, std::size_t s) const {
    return values[h * speeds.size() + s];
  }
};

inline constexpr double kDefaultScanTimeCap = 40.0;

// Smallest boundary time at which F reaches `threshold`; nullopt when the
// run to time_cap never gets there.
ScanTable min_time_scan(const std::vector<double>& heights,
                        const std::vector<double>& speeds, double threshold,
                        const RingSystem& system, const StateVector& initial,
                        const Objective& objective,
                        double time_cap = kDefaultScanTimeCap, int jobs = 1);

// Maximum of F over all boundary times up to time_cap.
ScanTable barrier_sweep(const std::vector<double>& heights,
                        const std::vector<double>& speeds,
                        const RingSystem& system, const StateVector& initial,
                        const Objective& objective,
                        double time_cap = kDefaultScanTimeCap, int jobs = 1);

// Ring translation of a Fock or charge state by `shift` sites.
StateVector rotate_state(const RingSystem& system, const StateVector& psi, int shift);

}  // namespace ringdrive
