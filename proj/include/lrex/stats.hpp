#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "lrex/coupled.hpp"
#include "lrex/rates.hpp"
#include "lrex/simulate.hpp"
#include "lrex/walk.hpp"

namespace lrex {

// Streaming mean and standard error.
struct Welford {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
  double stderr_mean() const { return n > 0 ? std::sqrt(variance() / n) : 0.0; }
};

// Standard error of an empirical proportion.
inline double proportion_se(double p, long n) {
  return n > 0 ? std::sqrt(std::max(p * (1 - p), 0.0) / n) : 0.0;
}

// ---------------------------------------------------------------------------
// Window discrepancy functionals on 1-d spaces.

// Window sites with |coordinate| <= radius, sorted by coordinate.
inline std::vector<Site> window_sweep(const SiteSpace& space, int radius) {
  if (space.dimension() != 1)
    throw ValidationError("window functionals are defined on 1-d spaces");
  std::vector<Site> sites = space.window(radius);
  std::sort(sites.begin(), sites.end(),
            [&](Site a, Site b) { return space.coord1(a) < space.coord1(b); });
  return sites;
}

// Number of positive discrepancies (first copy holds a particle where the
// second has a hole) inside the window of the given radius.
inline int positive_discrepancy_count(const SiteSpace& space, const PairConfiguration& pc,
                                      int radius) {
  int count = 0;
  for (Site s : window_sweep(space, radius)) count += pc.d(s) == 1;
  return count;
}

// Number of +to- sign alternations of the discrepancy field along the
// coordinate interval [lo, hi]: a positive discrepancy later followed by a
// negative one, zeros in between ignored.
inline int alternation_count(const SiteSpace& space, const PairConfiguration& pc, int lo,
                             int hi) {
  if (space.dimension() != 1)
    throw ValidationError("window functionals are defined on 1-d spaces");
  int count = 0, last = 0;
  for (Site s : window_sweep(space, std::max(std::abs(lo), std::abs(hi)))) {
    const int c = space.coord1(s);
    if (c < lo || c > hi) continue;
    const int d = pc.d(s);
    if (d == 0) continue;
    if (d < 0 && last > 0) ++count;
    last = d;
  }
  return count;
}

inline int alternation_count(const SiteSpace& space, const PairConfiguration& pc, int radius) {
  return alternation_count(space, pc, -radius, radius);
}

// Split [-n, n] into k contiguous blocks of near-equal length.
inline std::vector<std::pair<int, int>> equal_partition(int n, int k) {
  if (n < 0 || k < 1 || k > 2 * n + 1) throw ValidationError("bad partition shape");
  std::vector<std::pair<int, int>> blocks;
  const int total = 2 * n + 1;
  int start = -n;
  for (int b = 0; b < k; ++b) {
    const int len = total / k + (b < total % k ? 1 : 0);
    blocks.emplace_back(start, start + len - 1);
    start += len;
  }
  return blocks;
}

// Alternations over a window never exceed the blockwise alternations plus
// one per internal block boundary (a sign change can straddle a cut).
struct PartitionCheck {
  int whole = 0;
  int block_sum = 0;
  int blocks = 0;
  bool holds = false;
};

inline PartitionCheck partition_inequality_check(const SiteSpace& space,
                                                 const PairConfiguration& pc, int n, int k) {
  PartitionCheck pcheck;
  pcheck.whole = alternation_count(space, pc, n);
  pcheck.blocks = k;
  for (const auto& [lo, hi] : equal_partition(n, k))
    pcheck.block_sum += alternation_count(space, pc, lo, hi);
  pcheck.holds = pcheck.whole <= pcheck.block_sum + (k - 1);
  return pcheck;
}

// ---------------------------------------------------------------------------
// Density and run-length diagnostics.

struct DensityProfile {
  struct Row {
    int radius = 0;
    int particles = 0;
    int sites = 0;
    double density = 0.0;
  };
  std::vector<Row> rows;
  double max_density = 0.0;
  double min_density = 1.0;
};

inline DensityProfile density_profile(const SiteSpace& space, const Configuration& config,
                                      const std::vector<int>& radii) {
  DensityProfile out;
  for (int r : radii) {
    DensityProfile::Row row;
    row.radius = r;
    for (Site s : space.window(r)) {
      ++row.sites;
      row.particles += config(s);
    }
    if (row.sites == 0) throw ValidationError("empty window in density profile");
    row.density = double(row.particles) / row.sites;
    out.max_density = std::max(out.max_density, row.density);
    out.min_density = std::min(out.min_density, row.density);
    out.rows.push_back(row);
  }
  return out;
}

// Length of the occupied run starting at x and extending rightward (0 when
// x is vacant); on a torus the run is capped at one full turn.
inline int occupied_run_right(const SiteSpace& space, const Configuration& config, Site x) {
  if (space.dimension() != 1) throw ValidationError("run lengths are defined on 1-d spaces");
  int len = 0;
  Site s = x;
  while (s >= 0 && config(s) && len < space.size()) {
    ++len;
    s = space.step(s, {1});
  }
  return len;
}

// Length of the maximal occupied interval containing x.
inline int occupied_span(const SiteSpace& space, const Configuration& config, Site x) {
  if (!config(x)) return 0;
  const int right = occupied_run_right(space, config, x);
  if (right >= space.size()) return space.size();  // fully occupied circle
  int len = right;
  Site s = space.step(x, {-1});
  while (s >= 0 && config(s) && len < space.size()) {
    ++len;
    s = space.step(s, {-1});
  }
  return len;
}

// ---------------------------------------------------------------------------
// Monte Carlo stop reports: empirical counterpart of the exact solver.

struct EmpiricalStopReport {
  std::map<Site, long> stops;
  long cancel = 0;
  long gone = 0;
  long capped = 0;
  long replicas = 0;

  double stop_fraction(Site y) const {
    auto it = stops.find(y);
    return it == stops.end() ? 0.0 : double(it->second) / replicas;
  }
  double cancel_fraction() const { return double(cancel) / replicas; }
  double gone_fraction() const { return double(gone) / replicas; }
};

inline EmpiricalStopReport sample_stop_report(const SiteSpace& space, const Kernel& kernel,
                                              Site x, const Configuration& config,
                                              RateVariant variant, long replicas,
                                              std::uint64_t seed, long step_cap = 100000) {
  kernel.validate_on(space);
  EmpiricalStopReport rep;
  rep.replicas = replicas;
  for (long r = 0; r < replicas; ++r) {
    SharedWalk walk(space, kernel, Stream(derive_key(seed, stream_tag::replica, r)), x);
    bool resolved = false;
    for (long i = 1; i <= step_cap; ++i) {
      const Site s = walk.site_at(std::size_t(i));
      if (s < 0) {
        ++rep.gone;
        resolved = true;
        break;
      }
      if (variant == RateVariant::Jump && s == x) {
        ++rep.cancel;
        resolved = true;
        break;
      }
      if (!config(s)) {
        ++rep.stops[s];
        resolved = true;
        break;
      }
    }
    if (!resolved) ++rep.capped;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Stopping-length moments against the range envelope.
//
// A free-rule walk from an occupied site under a Bernoulli(rho) environment
// stops at its first step onto a vacancy. With sigma the stopping step and
// R_k the number of distinct sites seen up to step k,
//
//   P(sigma > k) = E[rho^(R_k - 1)],
//
// so, summing (2k+1) tail terms against the cruder (k+1)^2,
//
//   E[min(sigma, K+1)^2] <= (1/rho) * sum_{k=0..K} (k+1)^2 E[rho^(R_k)].
//
// Both sides are estimated on the same replicas: the walk gives R_k, lazy
// site occupancies give sigma.
struct SigmaMomentReport {
  double rho = 0;
  long replicas = 0;
  int cap = 0;  // sigma is censored at this value (= K+1)
  double mean = 0, mean_se = 0;
  double second = 0, second_se = 0;
  double cap_fraction = 0;
  double envelope = 0, envelope_se = 0;
  bool consistent = false;  // second <= envelope + 3 * (se_second + se_envelope)
};

inline SigmaMomentReport sigma_moment_estimate(const Kernel& kernel, double rho, long replicas,
                                               int K, std::uint64_t seed) {
  if (!kernel.is_offsets() || kernel.dimension() != 1)
    throw ValidationError("sigma moments need a 1-d translation-invariant kernel");
  if (rho <= 0 || rho >= 1) throw ValidationError("density must lie strictly in (0,1)");
  if (K < 1) throw ValidationError("need at least one step");

  SigmaMomentReport rep;
  rep.rho = rho;
  rep.replicas = replicas;
  rep.cap = K + 1;

  Welford w_sigma, w_sigma2, w_env;
  long capped = 0;
  for (long r = 0; r < replicas; ++r) {
    Stream walk(derive_key(seed, stream_tag::replica, r, 0));
    Stream env(derive_key(seed, stream_tag::replica, r, 1));
    std::map<long, bool> occupied;  // lazily sampled environment, origin fixed occupied
    occupied[0] = true;
    long coord = 0;
    std::vector<long> range(std::size_t(K) + 1);
    long seen = 1;
    std::map<long, char> visited;
    visited[0] = 1;
    range[0] = 1;
    long sigma = K + 1;
    for (int k = 1; k <= K; ++k) {
      coord += kernel.sample_offset(walk)[0];
      if (visited.emplace(coord, 1).second) ++seen;
      range[k] = seen;
      if (sigma > K) {
        auto [it, fresh] = occupied.emplace(coord, false);
        if (fresh) it->second = env.next_double() < rho;
        if (!it->second) sigma = k;
      }
    }
    if (sigma > K) ++capped;
    w_sigma.add(double(std::min<long>(sigma, K + 1)));
    const double s = double(std::min<long>(sigma, K + 1));
    w_sigma2.add(s * s);
    double envelope = 0;
    for (int k = 0; k <= K; ++k)
      envelope += double(k + 1) * double(k + 1) * std::pow(rho, double(range[k]));
    w_env.add(envelope / rho);
  }
  rep.mean = w_sigma.mean;
  rep.mean_se = w_sigma.stderr_mean();
  rep.second = w_sigma2.mean;
  rep.second_se = w_sigma2.stderr_mean();
  rep.envelope = w_env.mean;
  rep.envelope_se = w_env.stderr_mean();
  rep.cap_fraction = double(capped) / replicas;
  rep.consistent = rep.second <= rep.envelope + 3 * (rep.second_se + rep.envelope_se);
  return rep;
}

// ---------------------------------------------------------------------------
// Hazard accumulated before first entry.
//
// For a finite-state chain, the jump hazard into a target set integrated
// along the path up to the first entry is stochastically dominated by a unit
// exponential: P(integral > a) <= exp(-a), with equality for a two-state
// chain at unit rates.
struct HazardTailReport {
  struct Row {
    double a = 0;
    double empirical = 0;
    double se = 0;
    double bound = 0;
    bool within = false;
  };
  std::vector<Row> rows;
  long replicas = 0;
  double entered_fraction = 0;
};

inline HazardTailReport hazard_tail_test(const std::vector<std::vector<double>>& Q, int start,
                                         const std::vector<int>& target_set,
                                         const std::vector<double>& a_grid, long replicas,
                                         std::uint64_t seed) {
  const int n = static_cast<int>(Q.size());
  for (const auto& row : Q)
    if (static_cast<int>(row.size()) != n) throw ValidationError("hazard test needs a square Q");
  std::vector<char> in_target(n, 0);
  for (int t : target_set) {
    if (t < 0 || t >= n) throw ValidationError("target state out of range");
    in_target[t] = 1;
  }
  if (start < 0 || start >= n || in_target[start])
    throw ValidationError("start state must lie outside the target set");
  for (int i = 0; i < n; ++i) {
    double sum = 0;
    for (int j = 0; j < n; ++j) {
      if (i != j && Q[i][j] < 0) throw ValidationError("negative off-diagonal rate");
      sum += Q[i][j];
    }
    if (std::abs(sum) > 1e-9) throw ValidationError("generator rows must sum to zero");
  }

  const double a_max = *std::max_element(a_grid.begin(), a_grid.end());
  std::vector<long> exceed(a_grid.size(), 0);
  long entered = 0;
  for (long r = 0; r < replicas; ++r) {
    Stream rng(derive_key(seed, stream_tag::replica, r));
    int state = start;
    double hazard = 0;
    while (true) {
      double rate = 0, into = 0;
      for (int j = 0; j < n; ++j) {
        if (j == state) continue;
        rate += Q[state][j];
        if (in_target[j]) into += Q[state][j];
      }
      if (rate <= 0) break;  // absorbed outside the target: hazard stops growing
      const double hold = rng.next_exp() / rate;
      hazard += hold * into;
      if (hazard > a_max + 1) break;  // censored beyond the grid
      // Jump.
      double u = rng.next_double() * rate;
      int next = -1;
      for (int j = 0; j < n; ++j) {
        if (j == state) continue;
        u -= Q[state][j];
        if (u < 0) {
          next = j;
          break;
        }
      }
      if (next < 0) next = state;
      state = next;
      if (in_target[state]) {
        ++entered;
        break;
      }
    }
    for (std::size_t i = 0; i < a_grid.size(); ++i) exceed[i] += hazard > a_grid[i];
  }

  HazardTailReport rep;
  rep.replicas = replicas;
  rep.entered_fraction = double(entered) / replicas;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    HazardTailReport::Row row;
    row.a = a_grid[i];
    row.empirical = double(exceed[i]) / replicas;
    row.se = proportion_se(row.empirical, replicas);
    row.bound = std::exp(-a_grid[i]);
    row.within = row.empirical <= row.bound + 3 * row.se;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Compound exponential tails.

// P(E_1 + ... + E_(N+shift) > a) with N ~ Poisson(1) and E_i unit
// exponentials: sum over N of the Gamma(n+shift) tail.
inline double compound_tail(double a, int shift = 0) {
  if (a < 0) return 1.0;
  double total = 0;
  double pn = std::exp(-1.0);  // P(N = 0)
  for (int n = 0; n <= 80; ++n) {
    const int m = n + shift;
    if (m > 0) {
      // Gamma(m,1) tail at a.
      double term = std::exp(-a), tail = 0;
      for (int j = 0; j < m; ++j) {
        tail += term;
        term *= a / (j + 1);
      }
      total += pn * std::min(tail, 1.0);
    }
    pn *= 1.0 / (n + 1);
  }
  return total;
}

inline double sample_compound(Stream& rng, int shift = 0) {
  // Poisson(1) by Knuth's product method.
  int n = 0;
  double prod = rng.next_open_double();
  const double threshold = std::exp(-1.0);
  while (prod > threshold) {
    ++n;
    prod *= rng.next_open_double();
  }
  double total = 0;
  for (int i = 0; i < n + shift; ++i) total += rng.next_exp();
  return total;
}

// ---------------------------------------------------------------------------
// Integrated arrival rate into one site over [0,1].
//
// The integrand is the current rate at which any particle's stopped walk
// lands on x (zero while x is occupied). It is piecewise constant between
// events, so the integral is exact given the trajectory. Between successive
// arrivals the accumulated hazard is a unit exponential and arrivals need a
// departure in between, so the integral is compared against the compound
// tail with two extra exponentials of headroom.
struct ArrivalIntegralReport {
  struct Row {
    double a = 0;
    double empirical = 0;
    double se = 0;
    double bound = 0;
    bool within = false;
  };
  std::vector<Row> rows;
  long replicas = 0;
  double mean_integral = 0;
};

inline double arrival_rate_into(const SiteSpace& space, const Kernel& kernel,
                                const Configuration& config, Site x) {
  if (config(x)) return 0.0;
  double total = 0;
  for (Site z = 0; z < space.size(); ++z)
    if (config(z)) total += jump_stop_report(space, kernel, z, config).stop_at(x);
  return total;
}

inline ArrivalIntegralReport arrival_integral_tail(const SiteSpace& space, const Kernel& kernel,
                                                   Site x, double rho,
                                                   const std::vector<double>& a_grid,
                                                   long replicas, std::uint64_t seed,
                                                   long first_replica = 0) {
  ArrivalIntegralReport rep;
  rep.replicas = replicas;
  std::vector<long> exceed(a_grid.size(), 0);
  Welford w_int;
  for (long r = first_replica; r < first_replica + replicas; ++r) {
    Stream init(derive_key(seed, stream_tag::scratch, r));
    const Configuration eta0 = Configuration::bernoulli(space.size(), rho, init);
    const RngPlan plan{derive_key(seed, stream_tag::replica, r)};
    const Trajectory traj = run_single(space, kernel, eta0, 1.0, plan);
    Configuration config = eta0;
    double t_prev = 0, integral = 0;
    double value = arrival_rate_into(space, kernel, config, x);
    for (const Event& e : traj.events) {
      integral += value * (e.time - t_prev);
      t_prev = e.time;
      apply_resolution(config, e.site, Resolution{e.outcome, e.target, e.steps});
      value = arrival_rate_into(space, kernel, config, x);
    }
    integral += value * (1.0 - t_prev);
    w_int.add(integral);
    for (std::size_t i = 0; i < a_grid.size(); ++i) exceed[i] += integral > a_grid[i];
  }
  rep.mean_integral = w_int.mean;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    ArrivalIntegralReport::Row row;
    row.a = a_grid[i];
    row.empirical = double(exceed[i]) / replicas;
    row.se = proportion_se(row.empirical, replicas);
    row.bound = compound_tail(a_grid[i], 2);
    row.within = row.empirical <= row.bound + 3 * row.se;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Coupled ordering over time.

struct OrderedFractionReport {
  struct Row {
    double t = 0;
    long ordered = 0;
    long total = 0;
    double fraction = 0;
  };
  std::vector<Row> rows;
};

inline OrderedFractionReport ordered_fraction(const SiteSpace& space, const Kernel& kernel,
                                              const PairConfiguration& pc0,
                                              const std::vector<double>& times, long replicas,
                                              std::uint64_t seed, long first_replica = 0,
                                              long step_cap = kDefaultEventStepCap) {
  if (times.empty()) throw ValidationError("need at least one sample time");
  const double horizon = *std::max_element(times.begin(), times.end());
  std::vector<long> ordered(times.size(), 0);
  for (long r = first_replica; r < first_replica + replicas; ++r) {
    const RngPlan plan{derive_key(seed, stream_tag::replica, r)};
    const CoupledTrajectory traj = run_coupled(space, kernel, pc0, horizon, plan, step_cap);
    for (std::size_t i = 0; i < times.size(); ++i) ordered[i] += traj.at(times[i]).ordered();
  }
  OrderedFractionReport rep;
  for (std::size_t i = 0; i < times.size(); ++i) {
    OrderedFractionReport::Row row;
    row.t = times[i];
    row.ordered = ordered[i];
    row.total = replicas;
    row.fraction = double(ordered[i]) / replicas;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace lrex
