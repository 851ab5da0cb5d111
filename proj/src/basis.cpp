#include "ringdrive/basis.hpp"

#include <limits>
#include <sstream>

#include "ringdrive/errors.hpp"

namespace ringdrive {

namespace {

constexpr std::size_t kSaturated = std::numeric_limits<std::size_t>::max();

std::size_t saturating_add(std::size_t a, std::size_t b) {
  return (a > kSaturated - b) ? kSaturated : a + b;
}

void enumerate_fock(int site, int remaining, Configuration& current,
                    std::vector<Configuration>& out) {
  const int last = static_cast<int>(current.size()) - 1;
  if (site == last) {
    current[site] = remaining;
    out.push_back(current);
    return;
  }
  for (int n = remaining; n >= 0; --n) {
    current[site] = n;
    enumerate_fock(site + 1, remaining - n, current, out);
  }
  current[site] = 0;
}

void enumerate_charge(int site, int partial_sum, int dq, Configuration& current,
                      std::vector<Configuration>& out) {
  const int sites = static_cast<int>(current.size());
  const int left_after = sites - site - 1;
  for (int q = -dq; q <= dq; ++q) {
    const int sum = partial_sum + q;
    // the remaining sites can absorb at most left_after*dq of either sign
    if (sum > left_after * dq || sum < -left_after * dq) continue;
    current[site] = q;
    if (left_after == 0) {
      out.push_back(current);
    } else {
      enumerate_charge(site + 1, sum, dq, current, out);
    }
  }
}

// Number of zero-sum vectors in [-dq, dq]^L via a convolution table.
std::size_t charge_dimension(int sites, int dq) {
  const int width = 2 * sites * dq + 1;
  std::vector<std::size_t> ways(width, 0), next(width, 0);
  const int offset = sites * dq;
  ways[offset] = 1;
  for (int s = 0; s < sites; ++s) {
    std::fill(next.begin(), next.end(), 0);
    for (int i = 0; i < width; ++i) {
      if (ways[i] == 0) continue;
      for (int q = -dq; q <= dq; ++q) {
        const int j = i + q;
        if (j >= 0 && j < width) next[j] = saturating_add(next[j], ways[i]);
      }
    }
    ways.swap(next);
  }
  return ways[offset];
}

}  // namespace

std::string BasisTag::describe() const {
  std::ostringstream os;
  if (kind == BasisKind::Fock) {
    os << "Fock(L=" << sites << ", N=" << param << ")";
  } else {
    os << "Charge(L=" << sites << ", dQ=" << param << ")";
  }
  return os.str();
}

ConfigurationBasis::ConfigurationBasis(BasisTag tag,
                                       std::vector<Configuration> states)
    : tag_(tag), states_(std::move(states)) {
  index_.reserve(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], i);
}

std::size_t ConfigurationBasis::find(const Configuration& c) const {
  auto it = index_.find(c);
  return it == index_.end() ? states_.size() : it->second;
}

std::size_t fock_dimension(int sites, int particles) {
  // C(L+N-1, N) computed incrementally; each partial product is itself a
  // binomial coefficient so the division is exact.
  std::size_t result = 1;
  for (int i = 1; i <= particles; ++i) {
    const std::size_t num = static_cast<std::size_t>(sites - 1 + i);
    if (result > kSaturated / num) return kSaturated;
    result = result * num / static_cast<std::size_t>(i);
  }
  return result;
}

static std::vector<Configuration> fock_states(int sites, int particles,
                                              std::size_t cap) {
  if (sites < 3) throw InvalidArg("Fock basis needs at least 3 sites");
  if (particles < 1) throw InvalidArg("Fock basis needs at least 1 particle");
  const std::size_t dim = fock_dimension(sites, particles);
  if (dim > cap) {
    throw DimensionCap("Fock basis dimension " + std::to_string(dim) +
                       " exceeds cap " + std::to_string(cap));
  }
  std::vector<Configuration> states;
  states.reserve(dim);
  Configuration current(sites, 0);
  enumerate_fock(0, particles, current, states);
  return states;
}

static std::vector<Configuration> charge_states(int sites, int dq,
                                                std::size_t cap) {
  if (sites < 2) throw InvalidArg("charge basis needs at least 2 sites");
  if (dq < 1) throw InvalidArg("charge truncation must be at least 1");
  const std::size_t dim = charge_dimension(sites, dq);
  if (dim > cap) {
    throw DimensionCap("charge basis dimension " + std::to_string(dim) +
                       " exceeds cap " + std::to_string(cap));
  }
  std::vector<Configuration> states;
  states.reserve(dim);
  Configuration current(sites, 0);
  enumerate_charge(0, 0, dq, current, states);
  return states;
}

FockBasis::FockBasis(int sites, int particles, std::size_t cap)
    : ConfigurationBasis({BasisKind::Fock, sites, particles},
                         fock_states(sites, particles, cap)) {}

ChargeBasis::ChargeBasis(int sites, int dq_max, std::size_t cap)
    : ConfigurationBasis({BasisKind::Charge, sites, dq_max},
                         charge_states(sites, dq_max, cap)) {}

FockBasis build_fock_basis(int sites, int particles, std::size_t cap) {
  return FockBasis(sites, particles, cap);
}

ChargeBasis build_charge_basis(int sites, int dq_max, std::size_t cap) {
  return ChargeBasis(sites, dq_max, cap);
}

}  // namespace ringdrive
