#pragma once

#include <span>

#include "ringdrive/basis.hpp"
#include "ringdrive/operator.hpp"

namespace ringdrive {

// Driven Bose-Hubbard ring:
//   H = sum_j [ -J (a+_j a_{j+1} + h.c.) + P_j n_j + U/2 n_j (n_j - 1) ]
// with a_{L+1} = a_1.
HermitianOperator bh_hamiltonian(const FockBasis& basis, double hopping,
                                 double interaction,
                                 std::span<const double> potentials);

// Truncated quantum phase model threaded by a flux:
//   H = sum_j [ -2 J_E cos(phi_j - phi_{j+1} - flux) + P_j Q_j + U/2 Q_j^2 ]
// e^{+i phi_j} raises Q_j by one. Hops that leave |Q_j| <= dQ are dropped.
HermitianOperator qpm_hamiltonian(const ChargeBasis& basis, double coupling,
                                  double interaction,
                                  std::span<const double> potentials,
                                  double flux = 0.0);

}  // namespace ringdrive
