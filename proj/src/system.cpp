#include "ringdrive/system.hpp"

#include "ringdrive/errors.hpp"
#include "ringdrive/hamiltonian.hpp"

namespace ringdrive {

RingSystem RingSystem::bose_hubbard(int sites, int particles,
                                    double interaction, double hopping,
                                    std::size_t cap) {
  RingSystem s;
  s.model_ = ModelKind::BoseHubbard;
  s.sites_ = sites;
  s.hopping_ = hopping;
  s.interaction_ = interaction;
  s.basis_ = std::make_shared<const std::variant<FockBasis, ChargeBasis>>(
      std::in_place_type<FockBasis>, sites, particles, cap);
  return s;
}

RingSystem RingSystem::quantum_phase(int sites, int dq_max, double interaction,
                                     double coupling, double flux,
                                     std::size_t cap) {
  RingSystem s;
  s.model_ = ModelKind::QuantumPhase;
  s.sites_ = sites;
  s.hopping_ = coupling;
  s.interaction_ = interaction;
  s.flux_ = flux;
  s.basis_ = std::make_shared<const std::variant<FockBasis, ChargeBasis>>(
      std::in_place_type<ChargeBasis>, sites, dq_max, cap);
  return s;
}

const BasisTag& RingSystem::tag() const {
  return std::visit([](const auto& b) -> const BasisTag& { return b.tag(); },
                    *basis_);
}

std::size_t RingSystem::dim() const {
  return std::visit([](const auto& b) { return b.size(); }, *basis_);
}

const FockBasis& RingSystem::fock() const {
  if (const auto* b = std::get_if<FockBasis>(basis_.get())) return *b;
  throw InvalidArg("system is not a Bose-Hubbard ring");
}

const ChargeBasis& RingSystem::charge() const {
  if (const auto* b = std::get_if<ChargeBasis>(basis_.get())) return *b;
  throw InvalidArg("system is not a quantum phase model ring");
}

HermitianOperator RingSystem::hamiltonian(std::span<const double> potentials) const {
  if (model_ == ModelKind::BoseHubbard)
    return bh_hamiltonian(fock(), hopping_, interaction_, potentials);
  return qpm_hamiltonian(charge(), hopping_, interaction_, potentials, flux_);
}

EigenPair RingSystem::undriven_ground_state() const {
  const std::vector<double> zero(sites_, 0.0);
  return ground_state(hamiltonian(zero), options_);
}

double Objective::measure(MeasureKind kind, const StateVector& psi) const {
  if (kind == MeasureKind::Fidelity) {
    if (!target) throw InvalidArg("objective has no fidelity target");
    return fidelity(psi, *target);
  }
  if (!modes) throw InvalidArg("objective has no certification measure");
  return certification_W(psi, *modes, particles);
}

Objective make_objective(const RingSystem& system, const TargetSpec& spec,
                         bool want_fidelity, bool want_certification) {
  Objective obj;
  obj.particles = spec.particles;
  if (system.model() == ModelKind::QuantumPhase) {
    if (want_certification)
      throw InvalidArg("the certification measure is defined for Bose-Hubbard rings only");
    if (want_fidelity)
      obj.target = make_target(spec, system.charge(),
                               {system.hopping(), system.interaction()});
    return obj;
  }
  if (want_fidelity) obj.target = make_target(spec, system.fock());
  if (want_certification) {
    spec.validate(system.sites());
    if (spec.omega.size() < 2)
      throw InvalidArg("the certification measure needs at least two windings");
    obj.modes = mode_squares(system.fock(), spec.reduced_omega(system.sites()));
  }
  return obj;
}

}  // namespace ringdrive
