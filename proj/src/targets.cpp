#include "ringdrive/targets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "ringdrive/errors.hpp"
#include "ringdrive/hamiltonian.hpp"
#include "ringdrive/propagator.hpp"

namespace ringdrive {

namespace {

using SparseState = std::map<Configuration, Complex>;

// Applies sum_n c_n a+_n to a state stored as configuration -> amplitude.
SparseState apply_creation(const SparseState& in,
                           const std::vector<Complex>& coeffs) {
  SparseState out;
  for (const auto& [occ, amp] : in) {
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
      if (coeffs[n] == Complex(0.0, 0.0)) continue;
      Configuration next = occ;
      next[n] += 1;
      out[next] += amp * coeffs[n] * std::sqrt(static_cast<double>(next[n]));
    }
  }
  return out;
}

std::vector<Complex> mode_coefficients(int sites, int k) {
  std::vector<Complex> c(sites);
  const double norm = 1.0 / std::sqrt(static_cast<double>(sites));
  for (int n = 0; n < sites; ++n)
    c[n] = std::polar(norm, 2.0 * std::numbers::pi * k * n / sites);
  return c;
}

StateVector fill_from_modes(const FockBasis& basis,
                            const std::vector<Complex>& coeffs) {
  SparseState state;
  state[Configuration(basis.sites(), 0)] = 1.0;
  for (int p = 0; p < basis.particles(); ++p) state = apply_creation(state, coeffs);

  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(basis.size());
  for (const auto& [occ, amp] : state) amps(basis.find(occ)) = amp;
  return {basis.tag(), amps.normalized()};
}

}  // namespace

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::SingleWinding: return "single";
    case TargetKind::ProductSuperposition: return "product";
    case TargetKind::EntangledSuperposition: return "entangled";
    case TargetKind::QpmFluxGroundState: return "qpm_flux";
  }
  return "unknown";
}

TargetKind parse_target_kind(const std::string& name) {
  if (name == "single") return TargetKind::SingleWinding;
  if (name == "product") return TargetKind::ProductSuperposition;
  if (name == "entangled") return TargetKind::EntangledSuperposition;
  if (name == "qpm_flux") return TargetKind::QpmFluxGroundState;
  throw InvalidArg("unknown target kind '" + name + "'");
}

std::vector<int> TargetSpec::reduced_omega(int sites) const {
  std::vector<int> out;
  std::set<int> seen;
  for (int k : omega) {
    const int r = ((k % sites) + sites) % sites;
    if (!seen.insert(r).second)
      throw InvalidArg("omega: duplicate winding number " + std::to_string(k) +
                       " (mod " + std::to_string(sites) + ")");
    out.push_back(r);
  }
  return out;
}

void TargetSpec::validate(int sites) const {
  if (kind == TargetKind::QpmFluxGroundState) return;
  if (omega.empty()) throw InvalidArg("omega: at least one winding number needed");
  reduced_omega(sites);
  if (kind == TargetKind::SingleWinding && omega.size() != 1)
    throw InvalidArg("omega: single-winding target takes exactly one k");
  if (kind == TargetKind::EntangledSuperposition && omega.size() < 2)
    throw InvalidArg("omega: entangled target needs at least two k");
  if (particles < 1) throw InvalidArg("particles must be positive");
}

StateVector winding_state(const FockBasis& basis, int k) {
  const int r = ((k % basis.sites()) + basis.sites()) % basis.sites();
  return fill_from_modes(basis, mode_coefficients(basis.sites(), r));
}

StateVector make_target(const TargetSpec& spec, const FockBasis& basis) {
  if (spec.kind == TargetKind::QpmFluxGroundState)
    throw InvalidArg("flux ground-state targets live on a charge basis");
  if (spec.particles != basis.particles())
    throw InvalidArg("target particle count does not match the basis");
  spec.validate(basis.sites());
  const std::vector<int> omega = spec.reduced_omega(basis.sites());
  const int sites = basis.sites();

  switch (spec.kind) {
    case TargetKind::SingleWinding:
      return winding_state(basis, omega.front());
    case TargetKind::ProductSuperposition: {
      std::vector<Complex> coeffs(sites, 0.0);
      const double w = 1.0 / std::sqrt(static_cast<double>(omega.size()));
      for (int k : omega) {
        const auto c = mode_coefficients(sites, k);
        for (int n = 0; n < sites; ++n) coeffs[n] += w * c[n];
      }
      return fill_from_modes(basis, coeffs);
    }
    case TargetKind::EntangledSuperposition: {
      Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(basis.size());
      for (int k : omega) amps += winding_state(basis, k).amplitudes;
      return {basis.tag(), amps.normalized()};
    }
    default:
      break;
  }
  throw InvalidArg("unsupported target kind");
}

StateVector make_target(const TargetSpec& spec, const ChargeBasis& basis,
                        const QpmParams& params) {
  if (spec.kind != TargetKind::QpmFluxGroundState)
    throw InvalidArg("winding targets live on a Fock basis");
  const int sites = basis.sites();
  const std::vector<double> zero(sites, 0.0);
  const double flux = 2.0 * std::numbers::pi * spec.flux_index / sites;
  const HermitianOperator h =
      qpm_hamiltonian(basis, params.coupling, params.interaction, zero, flux);
  return ground_state(h).state;
}

double fidelity(const StateVector& psi, const StateVector& target) {
  require_same_basis(psi.basis, target.basis, "fidelity");
  if (psi.dim() != target.dim()) throw BasisMismatch("fidelity: dimension mismatch");
  return std::norm(psi.amplitudes.dot(target.amplitudes));
}

ModeSquares mode_squares(const FockBasis& basis, const std::vector<int>& omega) {
  ModeSquares out{basis.tag(), {}, {}};
  for (int k : omega) {
    const int r = ((k % basis.sites()) + basis.sites()) % basis.sites();
    out.omega.push_back(r);
    out.squares.push_back(momentum_mode_operator(basis, r).number_squared);
  }
  return out;
}

double certification_W(const StateVector& psi, const ModeSquares& modes,
                       int particles) {
  const int nc = static_cast<int>(modes.omega.size());
  if (nc < 2) throw InvalidArg("certification measure needs at least two windings");
  require_same_basis(psi.basis, modes.basis, "certification_W");
  double w = std::pow(static_cast<double>(nc), nc) /
             std::pow(static_cast<double>(particles), 2.0 * nc);
  for (const auto& op : modes.squares) w *= std::max(0.0, expectation(op, psi));
  return w;
}

}  // namespace ringdrive
