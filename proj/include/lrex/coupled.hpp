#pragma once

#include <map>
#include <utility>

#include "lrex/rates.hpp"

namespace lrex {

// Jump families of the coupled process. The numeric values are the family
// ids used in serialized reports ("family_2" .. "family_13").
enum class CoupledFamily : int {
  BothJump = 2,            // both copies jump x -> y together
  EtaJumpXiContinue = 3,   // eta stops at y, xi walks on to z
  XiJumpEtaContinue = 4,   // xi stops at y, eta walks on to z
  EtaJumpXiCancel = 5,     // eta stops at y, xi's walk returns to x
  XiJumpEtaCancel = 6,     // xi stops at y, eta's walk returns to x
  EtaAlone = 7,            // only eta holds a particle at x
  XiAlone = 8,             // only xi holds a particle at x
  EtaJumpXiVanish = 9,     // eta stops at y, xi's walk never stops
  XiJumpEtaVanish = 10,    // xi stops at y, eta's walk never stops
  EtaVanish = 11,          // lone eta particle disappears
  XiVanish = 12,           // lone xi particle disappears
  BothVanish = 13,         // the shared walk never stops for either copy
};

inline std::string family_label(CoupledFamily f) {
  return "family_" + std::to_string(static_cast<int>(f));
}

// All coupled jump rates out of one source site, for one pair of
// configurations evolving under the shared-walk coupling.
//
// With both copies occupied at the source, the walk runs on the product
// configuration until it hits a site vacant in either copy (or cancels, or
// never stops). A stop at a site vacant in only one copy resolves that copy
// and the walk continues for the other; by the strong Markov property the
// continuation is a fresh walk from the stop site, absorbed at the other
// copy's vacancies or at the source (a late cancellation).
//
// Escape fields hold probability mass that left an open window edge before
// resolving; they are zero on tori and occupied-exterior windows.
struct CoupledRates {
  Site source = -1;
  bool eta_at_source = false;
  bool xi_at_source = false;

  std::map<Site, double> both_jump;                              // family 2
  std::map<std::pair<Site, Site>, double> eta_jump_xi_continue;  // family 3
  std::map<std::pair<Site, Site>, double> xi_jump_eta_continue;  // family 4
  std::map<Site, double> eta_jump_xi_cancel;                     // family 5
  std::map<Site, double> xi_jump_eta_cancel;                     // family 6
  std::map<Site, double> eta_alone;                              // family 7
  std::map<Site, double> xi_alone;                               // family 8
  std::map<Site, double> eta_jump_xi_vanish;                     // family 9
  std::map<Site, double> xi_jump_eta_vanish;                     // family 10
  double eta_vanish = 0.0;                                       // family 11
  double xi_vanish = 0.0;                                        // family 12
  double both_vanish = 0.0;                                      // family 13

  double cancel = 0.0;  // the shared walk returns to the source first

  double both_escape = 0.0;
  double eta_escape = 0.0;
  double xi_escape = 0.0;
  std::map<Site, double> eta_jump_xi_escape;
  std::map<Site, double> xi_jump_eta_escape;

  bool boundary_touched = false;

  double escape_total() const {
    double t = both_escape + eta_escape + xi_escape;
    for (const auto& [y, p] : eta_jump_xi_escape) t += p;
    for (const auto& [y, p] : xi_jump_eta_escape) t += p;
    return t;
  }

  // Every outcome of the walk started at an occupied source, including
  // cancellation; equals 1 up to solver tolerance whenever either copy
  // holds a particle at the source.
  double total() const {
    double t = cancel + eta_vanish + xi_vanish + both_vanish + escape_total();
    for (const auto& [y, p] : both_jump) t += p;
    for (const auto& [yz, p] : eta_jump_xi_continue) t += p;
    for (const auto& [yz, p] : xi_jump_eta_continue) t += p;
    for (const auto& [y, p] : eta_jump_xi_cancel) t += p;
    for (const auto& [y, p] : xi_jump_eta_cancel) t += p;
    for (const auto& [y, p] : eta_alone) t += p;
    for (const auto& [y, p] : xi_alone) t += p;
    for (const auto& [y, p] : eta_jump_xi_vanish) t += p;
    for (const auto& [y, p] : xi_jump_eta_vanish) t += p;
    return t;
  }
};

namespace detail {

// Resolve the copy that is still walking after the other copy stopped at
// `from`: a free-rule walk absorbed at the vacancies of `remaining` and at
// the source (whose hit is a late cancellation).
inline AbsorbResult continuation_solve(const SiteSpace& space, const Kernel& kernel, Site from,
                                       Site source, const Configuration& remaining) {
  std::vector<char> transient(space.size(), 0);
  for (Site s = 0; s < space.size(); ++s) transient[s] = remaining(s) && s != source;
  return absorb_solve(space, kernel, from, transient);
}

}  // namespace detail

inline CoupledRates coupled_rates(const SiteSpace& space, const Kernel& kernel, Site x,
                                  const PairConfiguration& pc) {
  if (static_cast<std::size_t>(space.size()) != pc.size())
    throw ValidationError("pair configuration size does not match the site space");
  CoupledRates cr;
  cr.source = x;
  cr.eta_at_source = pc.eta(x);
  cr.xi_at_source = pc.xi(x);

  if (cr.eta_at_source && !cr.xi_at_source) {
    StopReport rep = jump_stop_report(space, kernel, x, pc.eta);
    for (const auto& [y, p] : rep.stop) cr.eta_alone[y] = p;
    cr.cancel = rep.cancel;
    cr.eta_vanish = rep.vanish;
    cr.eta_escape = rep.escape;
    cr.boundary_touched = rep.boundary_touched;
    return cr;
  }
  if (!cr.eta_at_source && cr.xi_at_source) {
    StopReport rep = jump_stop_report(space, kernel, x, pc.xi);
    for (const auto& [y, p] : rep.stop) cr.xi_alone[y] = p;
    cr.cancel = rep.cancel;
    cr.xi_vanish = rep.vanish;
    cr.xi_escape = rep.escape;
    cr.boundary_touched = rep.boundary_touched;
    return cr;
  }
  if (!cr.eta_at_source) return cr;  // neither copy occupied: no activity

  // Both copies occupied: run the walk on the product configuration.
  const Configuration prod = product(pc.eta, pc.xi);
  StopReport phase1 = jump_stop_report(space, kernel, x, prod);
  cr.cancel = phase1.cancel;
  cr.both_vanish = phase1.vanish;
  cr.both_escape = phase1.escape;
  cr.boundary_touched = phase1.boundary_touched;

  for (const auto& [y, m] : phase1.stop) {
    const bool eta_vacant = !pc.eta(y);
    const bool xi_vacant = !pc.xi(y);
    if (eta_vacant && xi_vacant) {
      cr.both_jump[y] = m;
      continue;
    }
    if (eta_vacant) {
      // eta resolved at y; xi walks on through its own particles.
      const AbsorbResult cont = detail::continuation_solve(space, kernel, y, x, pc.xi);
      for (const auto& [z, mz] : cont.absorbed) {
        if (z == x) cr.eta_jump_xi_cancel[y] += m * mz;
        else cr.eta_jump_xi_continue[{y, z}] += m * mz;
      }
      if (cont.vanish > 0) cr.eta_jump_xi_vanish[y] += m * cont.vanish;
      if (cont.escape > 0) cr.eta_jump_xi_escape[y] += m * cont.escape;
      cr.boundary_touched = cr.boundary_touched || cont.boundary_touched;
    } else {
      const AbsorbResult cont = detail::continuation_solve(space, kernel, y, x, pc.eta);
      for (const auto& [z, mz] : cont.absorbed) {
        if (z == x) cr.xi_jump_eta_cancel[y] += m * mz;
        else cr.xi_jump_eta_continue[{y, z}] += m * mz;
      }
      if (cont.vanish > 0) cr.xi_jump_eta_vanish[y] += m * cont.vanish;
      if (cont.escape > 0) cr.xi_jump_eta_escape[y] += m * cont.escape;
      cr.boundary_touched = cr.boundary_touched || cont.boundary_touched;
    }
  }
  return cr;
}

// Enumerate every coupled transition out of `pc` as (next pair, rate,
// family, source, first stop, second stop); -1 marks an unused stop slot.
// Escape mass from open window edges is folded into the matching
// disappearance shape, which is what the truncated dynamics do.
template <class Callback>
inline void for_each_coupled_transition(const SiteSpace& space, const Kernel& kernel,
                                        const PairConfiguration& pc, Callback&& cb) {
  for (Site x = 0; x < space.size(); ++x) {
    if (!pc.eta(x) && !pc.xi(x)) continue;
    const CoupledRates cr = coupled_rates(space, kernel, x, pc);

    for (const auto& [y, r] : cr.both_jump)
      cb(PairConfiguration(pc.eta.swapped(x, y), pc.xi.swapped(x, y)), r,
         CoupledFamily::BothJump, x, y, Site(-1));
    for (const auto& [yz, r] : cr.eta_jump_xi_continue)
      cb(PairConfiguration(pc.eta.swapped(x, yz.first), pc.xi.swapped(x, yz.second)), r,
         CoupledFamily::EtaJumpXiContinue, x, yz.first, yz.second);
    for (const auto& [yz, r] : cr.xi_jump_eta_continue)
      cb(PairConfiguration(pc.eta.swapped(x, yz.second), pc.xi.swapped(x, yz.first)), r,
         CoupledFamily::XiJumpEtaContinue, x, yz.first, yz.second);
    for (const auto& [y, r] : cr.eta_jump_xi_cancel)
      cb(PairConfiguration(pc.eta.swapped(x, y), pc.xi), r, CoupledFamily::EtaJumpXiCancel, x, y,
         Site(-1));
    for (const auto& [y, r] : cr.xi_jump_eta_cancel)
      cb(PairConfiguration(pc.eta, pc.xi.swapped(x, y)), r, CoupledFamily::XiJumpEtaCancel, x, y,
         Site(-1));
    for (const auto& [y, r] : cr.eta_alone)
      cb(PairConfiguration(pc.eta.swapped(x, y), pc.xi), r, CoupledFamily::EtaAlone, x, y,
         Site(-1));
    for (const auto& [y, r] : cr.xi_alone)
      cb(PairConfiguration(pc.eta, pc.xi.swapped(x, y)), r, CoupledFamily::XiAlone, x, y,
         Site(-1));

    {
      // Disappearance shapes, with open-edge escape folded in.
      std::map<Site, double> eta_jump_xi_gone = cr.eta_jump_xi_vanish;
      for (const auto& [y, r] : cr.eta_jump_xi_escape) eta_jump_xi_gone[y] += r;
      for (const auto& [y, r] : eta_jump_xi_gone)
        cb(PairConfiguration(pc.eta.swapped(x, y), pc.xi.killed(x)), r,
           CoupledFamily::EtaJumpXiVanish, x, y, Site(-1));
      std::map<Site, double> xi_jump_eta_gone = cr.xi_jump_eta_vanish;
      for (const auto& [y, r] : cr.xi_jump_eta_escape) xi_jump_eta_gone[y] += r;
      for (const auto& [y, r] : xi_jump_eta_gone)
        cb(PairConfiguration(pc.eta.killed(x), pc.xi.swapped(x, y)), r,
           CoupledFamily::XiJumpEtaVanish, x, y, Site(-1));
    }
    if (double r = cr.eta_vanish + cr.eta_escape; r > 0)
      cb(PairConfiguration(pc.eta.killed(x), pc.xi), r, CoupledFamily::EtaVanish, x, Site(-1),
         Site(-1));
    if (double r = cr.xi_vanish + cr.xi_escape; r > 0)
      cb(PairConfiguration(pc.eta, pc.xi.killed(x)), r, CoupledFamily::XiVanish, x, Site(-1),
         Site(-1));
    if (double r = cr.both_vanish + cr.both_escape; r > 0)
      cb(PairConfiguration(pc.eta.killed(x), pc.xi.killed(x)), r, CoupledFamily::BothVanish, x,
         Site(-1), Site(-1));
  }
}

// Single-copy counterpart: every transition out of `eta`, with escape folded
// into disappearance. The callback gets (next, rate, source, target); the
// target is -1 for a disappearance.
template <class Callback>
inline void for_each_single_transition(const SiteSpace& space, const Kernel& kernel,
                                       const Configuration& eta, Callback&& cb) {
  for (Site x = 0; x < space.size(); ++x) {
    if (!eta(x)) continue;
    const StopReport rep = jump_stop_report(space, kernel, x, eta);
    for (const auto& [y, r] : rep.stop) cb(eta.swapped(x, y), r, x, y);
    if (double r = rep.vanish + rep.escape; r > 0) cb(eta.killed(x), r, x, Site(-1));
  }
}

// Action of the coupled generator on an arbitrary pair function, with the
// per-transition increments accumulated by sign.
struct SignedGeneratorTerms {
  double positive = 0.0;
  double negative = 0.0;
  double value() const { return positive - negative; }
};

template <class PairFunction>
inline SignedGeneratorTerms coupled_generator_apply(const SiteSpace& space, const Kernel& kernel,
                                                    const PairConfiguration& pc,
                                                    PairFunction&& f) {
  SignedGeneratorTerms out;
  const double base = f(pc);
  for_each_coupled_transition(
      space, kernel, pc,
      [&](const PairConfiguration& next, double rate, CoupledFamily, Site, Site, Site) {
        const double d = rate * (f(next) - base);
        if (d > 0) out.positive += d;
        else out.negative -= d;
      });
  return out;
}

// Residuals of the identities tying one copy's marginal rates to the coupled
// families, at a source occupied in both copies and a target vacant in eta:
//
//   q(x,y,eta)  ==  together(y) + sum_z [eta to y, xi on to z]
//                 + sum_z [xi stopped at z, eta on to y]
//                 + [eta to y, xi cancels] + [eta to y, xi vanishes/escapes]
//
//   delta(x,eta) ==  both vanish + sum_y [xi to y, eta vanishes]
struct MarginalResiduals {
  double move_residual = 0.0;
  double vanish_residual = 0.0;
};

inline MarginalResiduals marginal_consistency_check(const SiteSpace& space, const Kernel& kernel,
                                                    const PairConfiguration& pc, Site x, Site y) {
  if (!pc.eta(x) || !pc.xi(x))
    throw ValidationError("marginal consistency check needs both copies occupied at the source");
  if (pc.eta(y)) throw ValidationError("marginal consistency check needs eta vacant at the target");
  if (x == y) throw ValidationError("marginal consistency check needs distinct sites");

  const CoupledRates cr = coupled_rates(space, kernel, x, pc);

  double move = 0.0;
  if (auto it = cr.both_jump.find(y); it != cr.both_jump.end()) move += it->second;
  for (const auto& [yz, r] : cr.eta_jump_xi_continue)
    if (yz.first == y) move += r;
  for (const auto& [yz, r] : cr.xi_jump_eta_continue)
    if (yz.second == y) move += r;
  if (auto it = cr.eta_jump_xi_cancel.find(y); it != cr.eta_jump_xi_cancel.end())
    move += it->second;
  if (auto it = cr.eta_jump_xi_vanish.find(y); it != cr.eta_jump_xi_vanish.end())
    move += it->second;
  if (auto it = cr.eta_jump_xi_escape.find(y); it != cr.eta_jump_xi_escape.end())
    move += it->second;

  double gone = cr.both_vanish;
  for (const auto& [z, r] : cr.xi_jump_eta_vanish) gone += r;

  MarginalResiduals res;
  res.move_residual = q_rate(space, kernel, x, y, pc.eta) - move;
  res.vanish_residual = delta_rate(space, kernel, x, pc.eta) - gone;
  return res;
}

// Discrepancy flow functionals. All four bound, in different tightnesses,
// the rate at which a positive discrepancy (eta-particle over xi-hole) at x
// feeds the target y. They are pointwise ordered: a <= b <= c, and d counts
// only the direct swap of an opposite discrepancy pair.
inline double discrepancy_a(const SiteSpace& space, const Kernel& kernel,
                            const PairConfiguration& pc, Site x, Site y) {
  if (x == y) throw ValidationError("discrepancy functionals need distinct sites");
  if (!pc.eta(x) || pc.xi(x)) return 0.0;
  double total = 0.0;
  if (!pc.eta(y) && !pc.xi(y)) total += q_rate(space, kernel, x, y, pc.eta);
  const Configuration prod = product(pc.eta, pc.xi);
  for (Site z = 0; z < space.size(); ++z) {
    if (z == x || !pc.eta(z) || !pc.xi(z)) continue;
    const Configuration eta_z = pc.eta.killed(z);
    if (eta_z(y) || pc.xi.killed(z)(y)) continue;
    const double in = q_rate(space, kernel, z, x, prod);
    if (in == 0.0) continue;
    total += in * q_bar_rate(space, kernel, x, y, eta_z);
  }
  return total;
}

inline double discrepancy_b(const SiteSpace& space, const Kernel& kernel,
                            const PairConfiguration& pc, Site x, Site y) {
  if (x == y) throw ValidationError("discrepancy functionals need distinct sites");
  if (!pc.eta(x) || pc.xi(x)) return 0.0;
  double total = 0.0;
  if (!pc.eta(y) && !pc.xi(y)) total += q_rate(space, kernel, x, y, pc.eta);
  const Configuration prod = product(pc.eta, pc.xi);
  for (Site z = 0; z < space.size(); ++z) {
    if (z == x || !pc.eta(z) || !pc.xi(z)) continue;
    const Configuration eta_z = pc.eta.killed(z);
    if (eta_z(y)) continue;
    const double in = q_rate(space, kernel, z, x, prod);
    if (in == 0.0) continue;
    total += in * q_bar_rate(space, kernel, x, y, eta_z);
  }
  return total;
}

inline double discrepancy_c(const SiteSpace& space, const Kernel& kernel, const Configuration& eta,
                            Site x, Site y) {
  if (x == y) throw ValidationError("discrepancy functionals need distinct sites");
  if (!eta(x)) return 0.0;
  double total = 0.0;
  if (!eta(y)) total += q_rate(space, kernel, x, y, eta);
  for (Site z = 0; z < space.size(); ++z) {
    if (z == x || !eta(z)) continue;
    const Configuration eta_z = eta.killed(z);
    if (eta_z(y)) continue;
    const double in = q_rate(space, kernel, z, x, eta);
    if (in == 0.0) continue;
    total += in * q_bar_rate(space, kernel, x, y, eta_z);
  }
  return total;
}

inline double discrepancy_d(const SiteSpace& space, const Kernel& kernel,
                            const PairConfiguration& pc, Site x, Site y) {
  if (x == y) throw ValidationError("discrepancy functionals need distinct sites");
  if (pc.eta(x) && !pc.xi(x) && !pc.eta(y) && pc.xi(y))
    return q_rate(space, kernel, x, y, pc.eta);
  return 0.0;
}

}  // namespace lrex
