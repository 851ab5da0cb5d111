#include "ringdrive/hamiltonian.hpp"

#include <cmath>
#include <vector>

#include "ringdrive/errors.hpp"

namespace ringdrive {

namespace {

using Triplet = Eigen::Triplet<Complex>;

SparseMatrix from_triplets(std::size_t dim, const std::vector<Triplet>& t) {
  const auto n = static_cast<Eigen::Index>(dim);
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

void check_potentials(int sites, std::span<const double> potentials) {
  if (static_cast<int>(potentials.size()) != sites) {
    throw InvalidArg("potential vector has " +
                     std::to_string(potentials.size()) + " entries, ring has " +
                     std::to_string(sites) + " sites");
  }
}

}  // namespace

double HermitianOperator::max_abs() const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

double HermitianOperator::hermiticity_defect() const {
  SparseMatrix adj = matrix.adjoint();
  SparseMatrix diff = matrix - adj;
  double m = 0.0;
  for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

bool HermitianOperator::is_real() const {
  for (Eigen::Index k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

double expectation(const HermitianOperator& op, const StateVector& psi) {
  require_same_basis(op.basis, psi.basis, "expectation");
  return psi.amplitudes.dot(op.matrix * psi.amplitudes).real();
}

void require_same_basis(const BasisTag& a, const BasisTag& b,
                        const char* what) {
  if (!(a == b)) {
    throw BasisMismatch(std::string(what) + ": " + a.describe() + " vs " +
                        b.describe());
  }
}

HermitianOperator bh_hamiltonian(const FockBasis& basis, double hopping,
                                 double interaction,
                                 std::span<const double> potentials) {
  const int sites = basis.sites();
  check_potentials(sites, potentials);
  if (!(hopping > 0.0)) throw InvalidArg("hopping J must be positive");

  std::vector<Triplet> triplets;
  triplets.reserve(basis.size() * (2 * sites + 1));
  Configuration next;
  for (std::size_t col = 0; col < basis.size(); ++col) {
    const Configuration& occ = basis.state(col);
    double diag = 0.0;
    for (int j = 0; j < sites; ++j) {
      const double n = occ[j];
      diag += potentials[j] * n + 0.5 * interaction * n * (n - 1.0);
    }
    triplets.emplace_back(col, col, diag);

    // a+_i a_j for both orientations of every ring bond
    for (int j = 0; j < sites; ++j) {
      const int k = (j + 1) % sites;
      for (auto [to, from] : {std::pair{j, k}, std::pair{k, j}}) {
        if (occ[from] == 0) continue;
        next = occ;
        const double amp = -hopping * std::sqrt(static_cast<double>(next[from])) *
                           std::sqrt(static_cast<double>(next[to] + 1));
        next[from] -= 1;
        next[to] += 1;
        triplets.emplace_back(basis.find(next), col, amp);
      }
    }
  }
  return {basis.tag(), from_triplets(basis.size(), triplets)};
}

HermitianOperator qpm_hamiltonian(const ChargeBasis& basis, double coupling,
                                  double interaction,
                                  std::span<const double> potentials,
                                  double flux) {
  const int sites = basis.sites();
  check_potentials(sites, potentials);
  const int dq = basis.dq_max();
  // T_{j,j+1} carries e^{-i flux}; its adjoint carries e^{+i flux}
  const Complex forward = -coupling * std::polar(1.0, -flux);
  const Complex backward = std::conj(forward);

  std::vector<Triplet> triplets;
  triplets.reserve(basis.size() * (2 * sites + 1));
  Configuration next;
  for (std::size_t col = 0; col < basis.size(); ++col) {
    const Configuration& q = basis.state(col);
    double diag = 0.0;
    for (int j = 0; j < sites; ++j)
      diag += potentials[j] * q[j] + 0.5 * interaction * q[j] * q[j];
    triplets.emplace_back(col, col, diag);

    for (int j = 0; j < sites; ++j) {
      const int k = (j + 1) % sites;
      // raise j, lower k
      if (q[j] < dq && q[k] > -dq) {
        next = q;
        next[j] += 1;
        next[k] -= 1;
        triplets.emplace_back(basis.find(next), col, forward);
      }
      // lower j, raise k
      if (q[j] > -dq && q[k] < dq) {
        next = q;
        next[j] -= 1;
        next[k] += 1;
        triplets.emplace_back(basis.find(next), col, backward);
      }
    }
  }
  return {basis.tag(), from_triplets(basis.size(), triplets)};
}

}  // namespace ringdrive
