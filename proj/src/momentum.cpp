#include "ringdrive/momentum.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "ringdrive/errors.hpp"

namespace ringdrive {

MomentumMode momentum_mode_operator(const FockBasis& basis, int k) {
  const int sites = basis.sites();
  if (k < 0 || k >= sites) throw InvalidArg("momentum index out of range");

  std::vector<Complex> phase(sites);
  for (int d = 0; d < sites; ++d)
    phase[d] = std::polar(1.0 / sites, 2.0 * std::numbers::pi * k * d / sites);

  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(basis.size() * sites * sites / 2 + basis.size());
  Configuration next;
  for (std::size_t col = 0; col < basis.size(); ++col) {
    const Configuration& occ = basis.state(col);
    for (int m = 0; m < sites; ++m) {
      if (occ[m] == 0) continue;
      // (1/L) e^{i 2 pi k (n - m) / L} a+_n a_m
      for (int n = 0; n < sites; ++n) {
        const Complex c = phase[((n - m) % sites + sites) % sites];
        if (n == m) {
          triplets.emplace_back(col, col, c * static_cast<double>(occ[m]));
          continue;
        }
        next = occ;
        const double amp = std::sqrt(static_cast<double>(next[m])) *
                           std::sqrt(static_cast<double>(next[n] + 1));
        next[m] -= 1;
        next[n] += 1;
        triplets.emplace_back(basis.find(next), col, c * amp);
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(basis.size());
  SparseMatrix number(dim, dim);
  number.setFromTriplets(triplets.begin(), triplets.end());
  number.prune(Complex(0.0, 0.0), 0.0);
  number.makeCompressed();
  SparseMatrix squared = (number * number).pruned();
  return {k, {basis.tag(), std::move(number)}, {basis.tag(), std::move(squared)}};
}

}  // namespace ringdrive
