#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <unordered_set>
#include <vector>

#include "lrex/absorb.hpp"
#include "lrex/configuration.hpp"
#include "lrex/errors.hpp"
#include "lrex/kernel.hpp"
#include "lrex/rng.hpp"
#include "lrex/site_space.hpp"

namespace lrex {

constexpr long kDefaultStepCap = 1000000;

enum class WalkTermination { HitTarget, ReturnedToStart, HitVacant, Escaped, StepCap };

inline const char* to_string(WalkTermination t) {
  switch (t) {
    case WalkTermination::HitTarget: return "hit-target";
    case WalkTermination::ReturnedToStart: return "returned-to-start";
    case WalkTermination::HitVacant: return "hit-vacant";
    case WalkTermination::Escaped: return "escaped";
    case WalkTermination::StepCap: return "step-cap";
  }
  return "?";
}

struct WalkPath {
  std::vector<Site> sites;  // -1 marks positions outside a segment window
  WalkTermination termination = WalkTermination::StepCap;
  Site terminal = -1;       // site where the stop fired, -1 for escape/cap
  long steps() const { return static_cast<long>(sites.size()) - 1; }
};

// The predicate inspects (step index >= 1, site) and reports why the walk
// should stop, if at all. Escape and the step cap are the walker's business.
using StopPredicate = std::function<std::optional<WalkTermination>(long, Site)>;

inline StopPredicate stop_at_sites(std::set<Site> targets) {
  return [targets = std::move(targets)](long, Site s) -> std::optional<WalkTermination> {
    if (targets.count(s)) return WalkTermination::HitTarget;
    return std::nullopt;
  };
}

inline StopPredicate stop_on_return(Site start) {
  return [start](long, Site s) -> std::optional<WalkTermination> {
    if (s == start) return WalkTermination::ReturnedToStart;
    return std::nullopt;
  };
}

// The single-particle stopping rule: halt at the first vacancy or on the
// first return to `home`. Sites outside the window never fire (they are
// handled by the walker's boundary policy).
inline StopPredicate stop_exclusion(const Configuration& occupancy, Site home) {
  return [&occupancy, home](long, Site s) -> std::optional<WalkTermination> {
    if (s == home) return WalkTermination::ReturnedToStart;
    if (!occupancy(s)) return WalkTermination::HitVacant;
    return std::nullopt;
  };
}

// Samples one kernel walk from `start` until the predicate fires, the walk
// leaves an open-escape window, or `step_cap` steps elapse. Under an
// occupied-exterior boundary the walk keeps moving outside the window (all
// exterior sites are occupied, so no predicate can fire there).
inline WalkPath sample_walk(const SiteSpace& space, const Kernel& kernel, Site start,
                            const StopPredicate& stop, long step_cap, Stream& rng) {
  kernel.validate_on(space);
  if (step_cap <= 0) step_cap = kDefaultStepCap;
  WalkPath path;
  path.sites.push_back(start);

  const bool coordinate_walk = space.is_segment() && kernel.is_offsets();
  long coord = coordinate_walk ? space.coord1(start) : 0;
  Site site = start;

  for (long n = 1; n <= step_cap; ++n) {
    if (coordinate_walk) {
      coord += kernel.sample_offset(rng)[0];
      site = space.site_at({static_cast<int>(coord)});
    } else {
      site = kernel.sample_step(space, site, rng);
    }
    path.sites.push_back(site);
    if (site < 0) {
      if (space.boundary() == BoundaryPolicy::OpenEscape) {
        path.termination = WalkTermination::Escaped;
        return path;
      }
      continue;  // occupied exterior: keep walking outside the window
    }
    if (auto t = stop(n, site)) {
      path.termination = *t;
      path.terminal = site;
      return path;
    }
  }
  path.termination = WalkTermination::StepCap;
  return path;
}

// Exact absorption probabilities split into requested targets and forbidden
// sites. Both sets absorb; everything else is pass-through.
struct HittingResult {
  std::unordered_map<Site, double> target;
  std::unordered_map<Site, double> forbidden;
  double escape = 0.0;
  double vanish = 0.0;

  double target_total() const {
    double t = 0;
    for (const auto& [s, p] : target) t += p;
    return t;
  }
};

inline HittingResult hitting_probability(const SiteSpace& space, const Kernel& kernel,
                                         Site start, const std::set<Site>& targets,
                                         const std::set<Site>& forbidden = {}) {
  if (targets.empty()) throw ValidationError("hitting_probability needs at least one target");
  for (Site t : targets)
    if (forbidden.count(t))
      throw ValidationError("site " + std::to_string(t) + " is both target and forbidden");
  std::vector<char> transient(space.size(), 1);
  for (Site t : targets) transient[t] = 0;
  for (Site f : forbidden) transient[f] = 0;
  const AbsorbResult r = absorb_solve(space, kernel, start, transient);
  HittingResult h;
  h.escape = r.escape;
  h.vanish = r.vanish;
  for (const auto& [s, p] : r.absorbed) {
    if (targets.count(s)) h.target[s] = p;
    else h.forbidden[s] = p;
  }
  return h;
}

// Probability a nearest-neighbour walk on Z never returns to its start:
// |p - q|. Anything else has no supported closed form.
inline double escape_probability(const Kernel& kernel) {
  const auto nn = kernel.nn_right();
  if (!nn)
    throw NotComputableError(
        "escape probability has a closed form only for nearest-neighbour kernels");
  const double p = *nn;
  return std::abs(p - (1 - p));
}

// Walk-range statistics on the free lattice (offsets kernels only):
// tau_k = first step at which the range reaches k, and the distribution of
// the range R_k after k steps on a grid of step counts.
struct RangeReport {
  int max_range = 0;
  long replicas = 0;
  std::vector<double> tau_mean;    // index k in [1, max_range]; tau_1 = 0
  std::vector<double> tau_stderr;
  std::vector<int> step_grid;
  std::vector<std::vector<long>> range_hist;  // per grid point: counts of R_k = r

  double prob_range_below(size_t grid_idx, double threshold) const {
    const auto& h = range_hist[grid_idx];
    long hits = 0, total = 0;
    for (size_t r = 0; r < h.size(); ++r) {
      total += h[r];
      if (static_cast<double>(r) < threshold) hits += h[r];
    }
    return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  }
};

inline RangeReport range_statistics(const Kernel& kernel, int max_range,
                                    std::vector<int> step_grid, long replicas, uint64_t seed) {
  if (!kernel.is_offsets())
    throw ValidationError("range statistics need an offsets kernel on the free lattice");
  if (max_range < 1) throw ValidationError("max range must be >= 1");
  const int dim = kernel.dimension();
  RangeReport rep;
  rep.max_range = max_range;
  rep.replicas = replicas;
  std::sort(step_grid.begin(), step_grid.end());
  rep.step_grid = step_grid;
  const long max_grid_step = step_grid.empty() ? 0 : step_grid.back();
  rep.range_hist.assign(step_grid.size(), {});
  for (size_t g = 0; g < step_grid.size(); ++g)
    rep.range_hist[g].assign(static_cast<size_t>(step_grid[g]) + 2, 0);

  std::vector<double> sum(max_range + 1, 0.0), sumsq(max_range + 1, 0.0);
  auto pack = [](const std::vector<long>& c) {
    uint64_t h = 1469598103934665603ULL;
    for (long v : c) {
      h ^= static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ULL;
      h *= 1099511628211ULL;
    }
    return h;
  };

  for (long rep_i = 0; rep_i < replicas; ++rep_i) {
    Stream rng(derive_key(seed, stream_tag::replica, static_cast<uint64_t>(rep_i)));
    std::vector<long> pos(dim, 0);
    std::unordered_set<uint64_t> visited;
    visited.insert(pack(pos));
    int range = 1;
    size_t grid_at = 0;
    // tau_1 = 0 by definition.
    std::vector<long> tau(max_range + 1, 0);
    const long hard_cap = 4 * kDefaultStepCap;
    for (long n = 1; n <= hard_cap; ++n) {
      const auto& off = kernel.sample_offset(rng);
      for (int ax = 0; ax < dim; ++ax) pos[ax] += off[ax];
      if (visited.insert(pack(pos)).second) {
        ++range;
        if (range <= max_range) tau[range] = n;
      }
      while (grid_at < step_grid.size() && n == step_grid[grid_at]) {
        ++rep.range_hist[grid_at][std::min<size_t>(range, rep.range_hist[grid_at].size() - 1)];
        ++grid_at;
      }
      if (range >= max_range && (grid_at >= step_grid.size() || n >= max_grid_step)) break;
    }
    for (int k = 2; k <= max_range; ++k) {
      sum[k] += static_cast<double>(tau[k]);
      sumsq[k] += static_cast<double>(tau[k]) * static_cast<double>(tau[k]);
    }
  }

  rep.tau_mean.assign(max_range + 1, 0.0);
  rep.tau_stderr.assign(max_range + 1, 0.0);
  for (int k = 2; k <= max_range; ++k) {
    const double mean = sum[k] / static_cast<double>(replicas);
    const double var =
        std::max(0.0, sumsq[k] / static_cast<double>(replicas) - mean * mean);
    rep.tau_mean[k] = mean;
    rep.tau_stderr[k] = std::sqrt(var / static_cast<double>(replicas));
  }
  return rep;
}

}  // namespace lrex
