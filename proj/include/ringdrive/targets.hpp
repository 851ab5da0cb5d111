#pragma once

#include <string>
#include <vector>

#include "ringdrive/basis.hpp"
#include "ringdrive/momentum.hpp"
#include "ringdrive/operator.hpp"

namespace ringdrive {

enum class TargetKind {
  SingleWinding,           // |k>^{(x)N}
  ProductSuperposition,    // (sum_k |k>/sqrt(N_C))^{(x)N}
  EntangledSuperposition,  // sum_k |k>^{(x)N} / sqrt(N_C)
  QpmFluxGroundState,      // ground state of the phase model at flux 2 pi j / L
};

std::string to_string(TargetKind kind);
TargetKind parse_target_kind(const std::string& name);

struct TargetSpec {
  TargetKind kind = TargetKind::SingleWinding;
  std::vector<int> omega;  // winding numbers; negative labels allowed
  int particles = 1;
  int flux_index = 0;

  // Winding numbers reduced into [0, L). Throws InvalidArg on duplicates
  // after reduction, an empty set, or a kind/size mismatch.
  std::vector<int> reduced_omega(int sites) const;
  void validate(int sites) const;
};

// Parameters of the undriven phase model used to define flux targets.
struct QpmParams {
  double coupling = 1.0;
  double interaction = 0.0;
};

StateVector make_target(const TargetSpec& spec, const FockBasis& basis);
StateVector make_target(const TargetSpec& spec, const ChargeBasis& basis,
                        const QpmParams& params);

// (b+_k)^N |vac> / sqrt(N!) on an N-particle Fock basis.
StateVector winding_state(const FockBasis& basis, int k);

// |<psi|target>|^2
double fidelity(const StateVector& psi, const StateVector& target);

// Precomputed n_k^2 for every k in a winding set, ready for repeated W
// evaluations on one basis.
struct ModeSquares {
  BasisTag basis;
  std::vector<int> omega;
  std::vector<HermitianOperator> squares;
};

ModeSquares mode_squares(const FockBasis& basis, const std::vector<int>& omega);

// W = N_C^{N_C} / N^{2 N_C} * prod_{k in omega} <n_k^2>.  Needs N_C >= 2.
double certification_W(const StateVector& psi, const ModeSquares& modes,
                       int particles);

}  // namespace ringdrive
