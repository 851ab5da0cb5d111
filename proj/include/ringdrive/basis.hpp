#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ringdrive {

inline constexpr std::size_t kDefaultDimensionCap = 500000;

using Configuration = std::vector<int>;

struct ConfigurationHash {
  std::size_t operator()(const Configuration& c) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (int v : c) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(v));
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

enum class BasisKind { Fock, Charge };

// Identifies the Hilbert space a vector or operator lives on.
struct BasisTag {
  BasisKind kind = BasisKind::Fock;
  int sites = 0;
  int param = 0;  // particle count (Fock) or charge bound (Charge)

  friend bool operator==(const BasisTag&, const BasisTag&) = default;
  std::string describe() const;
};

// Ordered list of lattice configurations with an inverse lookup.
class ConfigurationBasis {
 public:
  std::size_t size() const { return states_.size(); }
  int sites() const { return tag_.sites; }
  const BasisTag& tag() const { return tag_; }
  const Configuration& state(std::size_t i) const { return states_[i]; }
  const std::vector<Configuration>& states() const { return states_; }

  // Returns size() when the configuration is not in the basis.
  std::size_t find(const Configuration& c) const;

 protected:
  ConfigurationBasis(BasisTag tag, std::vector<Configuration> states);

 private:
  BasisTag tag_;
  std::vector<Configuration> states_;
  std::unordered_map<Configuration, std::size_t, ConfigurationHash> index_;
};

// Occupation-number basis of N bosons on an L-site ring, ordered by
// descending lexicographic order: (N,0,...,0) first, (0,...,0,N) last.
class FockBasis : public ConfigurationBasis {
 public:
  FockBasis(int sites, int particles, std::size_t cap = kDefaultDimensionCap);
  int particles() const { return tag().param; }
};

// Charge-fluctuation basis of the truncated phase model: vectors in
// [-dq, dq]^L with zero total charge, ascending lexicographic order.
class ChargeBasis : public ConfigurationBasis {
 public:
  ChargeBasis(int sites, int dq_max, std::size_t cap = kDefaultDimensionCap);
  int dq_max() const { return tag().param; }
};

// Stars-and-bars count C(L+N-1, N); saturates at SIZE_MAX on overflow.
std::size_t fock_dimension(int sites, int particles);

FockBasis build_fock_basis(int sites, int particles,
                           std::size_t cap = kDefaultDimensionCap);
ChargeBasis build_charge_basis(int sites, int dq_max,
                               std::size_t cap = kDefaultDimensionCap);

}  // namespace ringdrive
