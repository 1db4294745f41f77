#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrex/errors.hpp"
#include "lrex/rng.hpp"
#include "lrex/site_space.hpp"

namespace lrex {

// Occupancy bit-vector over a finite site space. Value semantics: swap/kill
// return copies so callers can hold configurations in maps and sets.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(int n_sites) : bits_(n_sites, 0) {}

  static Configuration from_bitstring(const std::string& s) {
    Configuration c(static_cast<int>(s.size()));
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '1') c.bits_[i] = 1;
      else if (s[i] != '0')
        throw ValidationError("bitstring may contain only 0 and 1");
    }
    return c;
  }

  static Configuration full(int n_sites) {
    Configuration c(n_sites);
    for (auto& b : c.bits_) b = 1;
    return c;
  }

  static Configuration from_sites(int n_sites, const std::vector<Site>& occupied) {
    Configuration c(n_sites);
    for (Site s : occupied) c.set(s, true);
    return c;
  }

  static Configuration bernoulli(int n_sites, double rho, Stream& rng) {
    Configuration c(n_sites);
    for (int i = 0; i < n_sites; ++i) c.bits_[i] = rng.next_double() < rho ? 1 : 0;
    return c;
  }

  // Packs the low bits of `mask` (site 0 = bit 0).
  static Configuration from_mask(int n_sites, uint64_t mask) {
    Configuration c(n_sites);
    for (int i = 0; i < n_sites; ++i) c.bits_[i] = (mask >> i) & 1u;
    return c;
  }

  uint64_t to_mask() const {
    uint64_t m = 0;
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) m |= (1ULL << i);
    return m;
  }

  int size() const { return static_cast<int>(bits_.size()); }
  bool at(Site s) const { return bits_[s] != 0; }
  bool operator()(Site s) const { return bits_[s] != 0; }
  void set(Site s, bool v) { bits_[s] = v ? 1 : 0; }

  int count() const {
    int c = 0;
    for (auto b : bits_) c += b;
    return c;
  }

  // Exchange occupancies of x and y (the particle move eta^{xy}).
  Configuration swapped(Site x, Site y) const {
    Configuration c = *this;
    std::swap(c.bits_[x], c.bits_[y]);
    return c;
  }

  // Remove the particle at x (eta_x).
  Configuration killed(Site x) const {
    Configuration c = *this;
    c.bits_[x] = 0;
    return c;
  }

  bool operator==(const Configuration& o) const { return bits_ == o.bits_; }
  bool operator!=(const Configuration& o) const { return bits_ != o.bits_; }

  // Pointwise <=, the particle-ordering used by the coupling.
  bool dominated_by(const Configuration& o) const {
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] > o.bits_[i]) return false;
    return true;
  }

  std::string bitstring() const {
    std::string s(bits_.size(), '0');
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) s[i] = '1';
    return s;
  }

  std::vector<Site> occupied_sites() const {
    std::vector<Site> out;
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out.push_back(static_cast<Site>(i));
    return out;
  }

 private:
  std::vector<uint8_t> bits_;
};

// Pointwise product eta*xi: occupied where both are.
inline Configuration product(const Configuration& a, const Configuration& b) {
  Configuration c(a.size());
  for (Site s = 0; s < a.size(); ++s) c.set(s, a(s) && b(s));
  return c;
}

struct PairConfiguration {
  Configuration eta;
  Configuration xi;

  PairConfiguration() = default;
  PairConfiguration(Configuration e, Configuration x) : eta(std::move(e)), xi(std::move(x)) {
    if (eta.size() != xi.size())
      throw ValidationError("paired configurations must share a site space");
  }

  int size() const { return eta.size(); }

  // Discrepancy field d = eta - xi in {-1, 0, +1}.
  int d(Site s) const { return static_cast<int>(eta(s)) - static_cast<int>(xi(s)); }

  // Ordered means one marginal dominates the other pointwise.
  bool ordered() const { return eta.dominated_by(xi) || xi.dominated_by(eta); }

  Configuration both() const { return product(eta, xi); }

  bool operator==(const PairConfiguration& o) const { return eta == o.eta && xi == o.xi; }
};

}  // namespace lrex
