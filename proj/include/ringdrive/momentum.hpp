#pragma once

#include "ringdrive/basis.hpp"
#include "ringdrive/operator.hpp"

namespace ringdrive {

// Occupation of quasi-momentum mode k, n_k = b+_k b_k with
// b+_k = L^{-1/2} sum_n e^{i 2 pi k n / L} a+_n, and its square.
struct MomentumMode {
  int k = 0;
  HermitianOperator number;
  HermitianOperator number_squared;
};

MomentumMode momentum_mode_operator(const FockBasis& basis, int k);

}  // namespace ringdrive
