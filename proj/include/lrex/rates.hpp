#pragma once

#include <set>
#include <unordered_map>
#include <vector>

#include "lrex/absorb.hpp"
#include "lrex/configuration.hpp"
#include "lrex/errors.hpp"
#include "lrex/kernel.hpp"
#include "lrex/site_space.hpp"

namespace lrex {

// Distribution of where a walk from `source` first stops.
//
// Two stopping rules appear throughout:
//  - the jump rule: the walk halts at the first vacancy of `occupancy` or on
//    the first return to `source` (reported as `cancel`);
//  - the free rule: the walk halts at the first vacancy only, and may pass
//    through an occupied `source` any number of times.
//
// `vanish` is the exact probability that the walk never stops (possible on
// reducible kernels and on occupied-exterior truncations); `escape` is mass
// lost through an open window edge.
struct StopReport {
  Site source = -1;
  std::unordered_map<Site, double> stop;  // first-stop site -> probability
  double cancel = 0.0;
  double vanish = 0.0;
  double escape = 0.0;
  bool boundary_touched = false;

  double stop_at(Site y) const {
    auto it = stop.find(y);
    return it == stop.end() ? 0.0 : it->second;
  }

  double move_total() const {
    double t = 0;
    for (const auto& [s, p] : stop) t += p;
    return t;
  }
};

// Jump-rule report: absorbing at every vacancy and at the source itself.
inline StopReport jump_stop_report(const SiteSpace& space, const Kernel& kernel, Site source,
                                   const Configuration& occupancy) {
  std::vector<char> transient(space.size(), 0);
  for (Site s = 0; s < space.size(); ++s) transient[s] = occupancy(s) && s != source;
  const AbsorbResult r = absorb_solve(space, kernel, source, transient);
  StopReport rep;
  rep.source = source;
  rep.vanish = r.vanish;
  rep.escape = r.escape;
  rep.boundary_touched = r.boundary_touched;
  for (const auto& [s, p] : r.absorbed) {
    if (s == source) rep.cancel = p;
    else rep.stop[s] = p;
  }
  return rep;
}

// Free-rule report: absorbing at vacancies only (the source included when it
// is vacant); an occupied source is an ordinary pass-through site.
inline StopReport free_stop_report(const SiteSpace& space, const Kernel& kernel, Site source,
                                   const Configuration& occupancy) {
  std::vector<char> transient(space.size(), 0);
  for (Site s = 0; s < space.size(); ++s) transient[s] = occupancy(s);
  const AbsorbResult r = absorb_solve(space, kernel, source, transient);
  StopReport rep;
  rep.source = source;
  rep.vanish = r.vanish;
  rep.escape = r.escape;
  rep.boundary_touched = r.boundary_touched;
  for (const auto& [s, p] : r.absorbed) rep.stop[s] = p;
  return rep;
}

// q(x,y,eta): probability the walk from x reaches y before returning to x,
// every strictly intermediate site occupied. Defined for any y; the target
// absorbs regardless of its own occupancy.
inline double q_rate(const SiteSpace& space, const Kernel& kernel, Site x, Site y,
                     const Configuration& eta) {
  if (x == y) throw ValidationError("q rate needs distinct source and target");
  std::vector<char> transient(space.size(), 0);
  for (Site s = 0; s < space.size(); ++s) transient[s] = eta(s) && s != x && s != y;
  return absorb_solve(space, kernel, x, transient).at(y);
}

// Free-rule variant: no cancellation at x; the walk may revisit an occupied x.
inline double q_bar_rate(const SiteSpace& space, const Kernel& kernel, Site x, Site y,
                         const Configuration& eta) {
  if (x == y) throw ValidationError("q-bar rate needs distinct source and target");
  std::vector<char> transient(space.size(), 0);
  for (Site s = 0; s < space.size(); ++s) transient[s] = eta(s) && s != y;
  return absorb_solve(space, kernel, x, transient).at(y);
}

// delta(x,eta): probability the walk from x stays in occupied sites forever
// and never returns to x. Exact on finite spaces (zero when every transient
// class drains); closed-form boundary excursions cover nearest-neighbour
// occupied-exterior truncations; anything else raises NotComputableError
// inside the solve.
inline double delta_rate(const SiteSpace& space, const Kernel& kernel, Site x,
                         const Configuration& eta) {
  if (!eta(x)) return 0.0;  // the product over the walk includes its start
  return jump_stop_report(space, kernel, x, eta).vanish;
}

// Rate bundle for one source site: jump-rule stops (with cancel and delta)
// plus free-rule stops, as serialized by the reporting layer.
struct RateReport {
  Site source = -1;
  StopReport jump;  // q(x,y,eta) per vacant y, cancel, delta = vanish
  StopReport free;  // q-bar per vacant y
};

inline RateReport rate_report(const SiteSpace& space, const Kernel& kernel, Site x,
                              const Configuration& eta) {
  RateReport r;
  r.source = x;
  r.jump = jump_stop_report(space, kernel, x, eta);
  r.free = free_stop_report(space, kernel, x, eta);
  return r;
}

// L++ f_x: total arrival rate into x, counted whether or not x is occupied.
inline double arrival_rate(const SiteSpace& space, const Kernel& kernel, Site x,
                           const Configuration& eta) {
  double total = 0;
  for (Site z = 0; z < space.size(); ++z)
    if (eta(z) && z != x) total += q_rate(space, kernel, z, x, eta);
  return total;
}

// Generator action on the cylinder f_R(eta) = prod_{z in R} eta(z), split
// into its gain and loss parts. On segment truncations the sums run over
// window sites only, which the `partial` flag records.
struct GeneratorTerms {
  double gain = 0.0;
  double loss = 0.0;
  bool partial = false;
  double value() const { return gain - loss; }
};

inline GeneratorTerms generator_apply(const SiteSpace& space, const Kernel& kernel,
                                      const std::set<Site>& R, const Configuration& eta) {
  if (R.empty()) throw ValidationError("generator_apply needs a nonempty site set");
  GeneratorTerms out;
  out.partial = space.is_segment();

  // Gain: some x outside R jumps onto the unique vacancy of R.
  Site vacant_in_R = -1;
  int vacancies = 0;
  for (Site y : R)
    if (!eta(y)) { vacant_in_R = y; ++vacancies; }
  if (vacancies == 1) {
    for (Site x = 0; x < space.size(); ++x) {
      if (!eta(x) || R.count(x)) continue;
      out.gain += q_rate(space, kernel, x, vacant_in_R, eta);
    }
  }

  // Loss: R fully occupied and some member either jumps away or disappears.
  if (vacancies == 0) {
    for (Site x : R) {
      const StopReport rep = jump_stop_report(space, kernel, x, eta);
      out.loss += rep.move_total() + rep.vanish + rep.escape;
    }
  }
  return out;
}

// Signed and absolute displacement sums of the stopped walk, 1-d spaces.
// variant "jump": sum over vacant y of (y-x) q(x,y,eta) — the cancelled mass
// sits at displacement zero. variant "free": same with q-bar; mass stopping
// on a vacant x contributes zero displacement.
struct DisplacementSum {
  double signed_sum = 0.0;
  double absolute_sum = 0.0;
};

enum class RateVariant { Jump, Free };

inline DisplacementSum displacement_sum(const SiteSpace& space, const Kernel& kernel, Site x,
                                        const Configuration& eta, RateVariant variant) {
  if (space.dimension() != 1 || !space.is_segment())
    throw ValidationError(
        "displacement sums need a 1-d window; coordinates wrap on a torus");
  const StopReport rep = variant == RateVariant::Jump
                             ? jump_stop_report(space, kernel, x, eta)
                             : free_stop_report(space, kernel, x, eta);
  if (rep.escape > 0 || rep.vanish > 0 || rep.boundary_touched)
    throw ValidationError(
        "displacement sum needs the walk to stop strictly inside the window; "
        "enlarge the window or thin the configuration");
  DisplacementSum d;
  const int cx = space.coord1(x);
  for (const auto& [y, p] : rep.stop) {
    const double dy = space.coord1(y) - cx;
    d.signed_sum += dy * p;
    d.absolute_sum += std::abs(dy) * p;
  }
  return d;
}

}  // namespace lrex
