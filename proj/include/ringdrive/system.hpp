#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>

#include "ringdrive/basis.hpp"
#include "ringdrive/operator.hpp"
#include "ringdrive/propagator.hpp"
#include "ringdrive/targets.hpp"

namespace ringdrive {

enum class ModelKind { BoseHubbard, QuantumPhase };

// A ring model with fixed couplings whose site potentials are the control.
// Energies are in units of the hopping (J or J_E), times in its inverse.
class RingSystem {
 public:
  static RingSystem bose_hubbard(int sites, int particles, double interaction,
                                 double hopping = 1.0,
                                 std::size_t cap = kDefaultDimensionCap);
  static RingSystem quantum_phase(int sites, int dq_max, double interaction,
                                  double coupling = 1.0, double flux = 0.0,
                                  std::size_t cap = kDefaultDimensionCap);

  ModelKind model() const { return model_; }
  int sites() const { return sites_; }
  double hopping() const { return hopping_; }
  double interaction() const { return interaction_; }
  double flux() const { return flux_; }
  const BasisTag& tag() const;
  std::size_t dim() const;

  // Throws InvalidArg unless the model is Bose-Hubbard (resp. phase model).
  const FockBasis& fock() const;
  const ChargeBasis& charge() const;

  HermitianOperator hamiltonian(std::span<const double> potentials) const;
  // Ground state of the undriven ring (all potentials zero).
  EigenPair undriven_ground_state() const;

  const PropagatorOptions& propagator() const { return options_; }
  void set_propagator(const PropagatorOptions& opts) { options_ = opts; }

 private:
  RingSystem() = default;

  ModelKind model_ = ModelKind::BoseHubbard;
  int sites_ = 0;
  double hopping_ = 1.0;
  double interaction_ = 0.0;
  double flux_ = 0.0;
  std::shared_ptr<const std::variant<FockBasis, ChargeBasis>> basis_;
  PropagatorOptions options_;
};

enum class MeasureKind { Fidelity, Certification };

// Which figures of merit are tracked along a protocol.
struct Objective {
  std::optional<StateVector> target;
  std::optional<ModeSquares> modes;
  int particles = 1;

  bool has_fidelity() const { return target.has_value(); }
  bool has_certification() const { return modes.has_value(); }
  double measure(MeasureKind kind, const StateVector& psi) const;
};

// Builds the target state and, for Fock systems with at least two
// windings, the n_k^2 operators behind W.
Objective make_objective(const RingSystem& system, const TargetSpec& spec,
                         bool want_fidelity, bool want_certification);

}  // namespace ringdrive
