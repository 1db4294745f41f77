#pragma once

#include <chrono>
#include <cmath>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "lrex/exact.hpp"
#include "lrex/io.hpp"
#include "lrex/stats.hpp"

// Release gate: every guarantee the library advertises, checked end to end
// at fixed tolerances. Statistical criteria run at seeds derived from the
// master seed and are calibrated to pass at the default master seed; the
// exact-identity criteria are seed-independent.
namespace lrex::acceptance {

inline constexpr std::uint64_t kDefaultSeed = 20250830;

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

namespace detail {

inline std::uint64_t sub_seed(std::uint64_t seed, int criterion, std::uint64_t a = 0,
                              std::uint64_t b = 0) {
  return derive_key(seed, 100 + criterion, a, b);
}

struct ZTracker {
  double max_z = 0;
  long comparisons = 0;
  bool ok = true;

  // |observed - expected| <= 3 * se + floor
  void check(double observed, double expected, double se, double floor = 1e-9) {
    ++comparisons;
    const double dev = std::abs(observed - expected);
    if (se > 0) max_z = std::max(max_z, dev / se);
    if (dev > 3 * se + floor) ok = false;
  }
};

inline std::string fmt(double v) { return io::format_double(v); }

// --- 1: Monte Carlo walks agree with the exact first-stop solves. ---------
inline CriterionResult walk_rate_agreement(std::uint64_t seed) {
  CriterionResult res{1, "walk_rate_agreement"};
  const long walks = 100000;
  ZTracker z;
  for (int c = 0; c < 50; ++c) {
    Stream pick(sub_seed(seed, 1, c));
    // Space: torus, open window, or occupied-exterior window.
    const int kind = static_cast<int>(pick.next_below(10));
    SiteSpace space = kind < 5 ? SiteSpace::torus({5 + static_cast<int>(pick.next_below(8))})
                     : kind < 8
                         ? SiteSpace::segment(7 + static_cast<int>(pick.next_below(6)),
                                              BoundaryPolicy::OpenEscape)
                         : SiteSpace::segment(7 + static_cast<int>(pick.next_below(6)),
                                              BoundaryPolicy::OccupiedExterior);
    const bool need_nn = space.is_segment() && space.boundary() == BoundaryPolicy::OccupiedExterior;
    Kernel kernel = Kernel::nearest_neighbour(0.5);
    const int kkind = need_nn ? 0 : static_cast<int>(pick.next_below(3));
    if (kkind == 0) {
      kernel = Kernel::nearest_neighbour(0.55 + 0.35 * pick.next_double());
    } else if (kkind == 1) {
      double a = 0.1 + pick.next_double(), b = 0.1 + pick.next_double(),
             d = 0.1 + pick.next_double();
      const double t = a + b + d;
      kernel = Kernel::from_offsets_1d({{1, a / t}, {2, b / t}, {-1, d / t}});
    } else {
      const int n = space.size();
      std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
      for (int i = 0; i < n; ++i) {
        double total = 0;
        for (int j = 0; j < n; ++j)
          if (j != i) total += m[i][j] = 0.05 + pick.next_double();
        for (int j = 0; j < n; ++j) m[i][j] /= total;
      }
      kernel = Kernel::from_matrix(m);
    }
    Configuration eta(space.size());
    for (Site s = 0; s < space.size(); ++s) eta.set(s, pick.next_double() < 0.5);
    const Site x = static_cast<Site>(pick.next_below(space.size()));
    eta.set(x, 1);
    bool has_vacancy = false;
    for (Site s = 0; s < space.size(); ++s) has_vacancy = has_vacancy || !eta(s);
    if (!has_vacancy) eta.set((x + 1) % space.size(), 0);

    const RateReport exact = rate_report(space, kernel, x, eta);
    for (RateVariant variant : {RateVariant::Jump, RateVariant::Free}) {
      const StopReport& er = variant == RateVariant::Jump ? exact.jump : exact.free;
      const EmpiricalStopReport emp = sample_stop_report(space, kernel, x, eta, variant, walks,
                                                         sub_seed(seed, 1, c, 7 + int(variant)));
      auto se = [&](double p) { return std::sqrt(std::max(p * (1 - p), 0.0) / walks); };
      for (Site s = 0; s < space.size(); ++s) {
        const double p = er.stop_at(s);
        if (p > 0 || emp.stops.count(s)) z.check(emp.stop_fraction(s), p, se(p));
      }
      if (variant == RateVariant::Jump) z.check(emp.cancel_fraction(), er.cancel, se(er.cancel));
      const double gone = er.vanish + er.escape;
      z.check((double(emp.gone) + double(emp.capped)) / walks, gone, se(gone));
    }
  }
  res.pass = z.ok;
  res.detail = "max_z=" + fmt(z.max_z) + " comparisons=" + std::to_string(z.comparisons);
  return res;
}

// --- 2: zero-mean kernels give zero expected stop displacement. ------------
inline CriterionResult zero_mean_displacement(std::uint64_t seed) {
  CriterionResult res{2, "zero_mean_displacement"};
  const std::vector<Kernel> kernels = {
      Kernel::from_offsets_1d({{1, 0.5}, {-1, 0.5}}),
      Kernel::from_offsets_1d({{2, 1.0 / 3.0}, {-1, 2.0 / 3.0}}),
  };
  SiteSpace space = SiteSpace::segment(31, BoundaryPolicy::OpenEscape);
  double worst = 0;
  for (int c = 0; c < 100; ++c) {
    Stream pick(sub_seed(seed, 2, c));
    const Kernel& kernel = kernels[c % 2];
    Configuration eta(space.size());
    std::vector<Site> support;
    for (Site s = 0; s < space.size(); ++s) {
      if (std::abs(space.coord1(s)) <= 9 && pick.next_double() < 0.5) {
        eta.set(s, 1);
        support.push_back(s);
      }
    }
    if (support.empty()) {
      eta.set(space.site_at({0}), 1);
      support.push_back(space.site_at({0}));
    }
    const Site x = support[pick.next_below(support.size())];
    for (RateVariant variant : {RateVariant::Jump, RateVariant::Free}) {
      const DisplacementSum d = displacement_sum(space, kernel, x, eta, variant);
      worst = std::max(worst, std::abs(d.signed_sum));
    }
  }
  res.pass = worst < 1e-10;
  res.detail = "max_abs_signed_sum=" + fmt(worst);
  return res;
}

// --- 3: coupled families reproduce the marginal rates exactly. -------------
inline CriterionResult coupling_marginals(std::uint64_t seed) {
  CriterionResult res{3, "coupling_marginals"};
  const SiteSpace space = SiteSpace::torus({8});
  const std::vector<Kernel> kernels = {
      Kernel::nearest_neighbour(0.7),
      Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}}),
  };
  double worst = 0;
  for (int c = 0; c < 200; ++c) {
    Stream pick(sub_seed(seed, 3, c));
    const Kernel& kernel = kernels[c % 2];
    Configuration eta(space.size()), xi(space.size());
    for (Site s = 0; s < space.size(); ++s) {
      eta.set(s, pick.next_double() < 0.55);
      xi.set(s, pick.next_double() < 0.55);
    }
    const Site x = static_cast<Site>(pick.next_below(space.size()));
    eta.set(x, 1);
    xi.set(x, 1);
    Site y = static_cast<Site>(pick.next_below(space.size()));
    while (y == x) y = static_cast<Site>(pick.next_below(space.size()));
    eta.set(y, 0);
    const PairConfiguration pc(eta, xi);
    const MarginalResiduals mr = marginal_consistency_check(space, kernel, pc, x, y);
    worst = std::max({worst, std::abs(mr.move_residual), std::abs(mr.vanish_residual)});
    const CoupledRates cr = coupled_rates(space, kernel, x, pc);
    worst = std::max(worst, std::abs(cr.total() - 1.0));
  }
  res.pass = worst < 1e-10;
  res.detail = "max_residual=" + fmt(worst);
  return res;
}

// --- 4: product measures are invariant on tori. -----------------------------
inline CriterionResult product_measure_invariance(std::uint64_t) {
  CriterionResult res{4, "product_measure_invariance"};
  double worst = 0;
  for (int n = 5; n <= 10; ++n) {
    const ExactGenerator g = build_generator(SiteSpace::torus({n}), Kernel::nearest_neighbour(0.7));
    const InvarianceReport rep = invariance_report(g, product_measure(g, 0.4), 3);
    worst = std::max({worst, rep.generator_residual, rep.max_cylinder()});
  }
  res.pass = worst < 1e-8;
  res.detail = "max_residual=" + fmt(worst);
  return res;
}

// --- 5: uniform measures on particle-count shells are invariant. ------------
inline CriterionResult shell_uniform_invariance(std::uint64_t) {
  CriterionResult res{5, "shell_uniform_invariance"};
  const std::vector<Kernel> kernels = {
      Kernel::nearest_neighbour(0.7),
      Kernel::nearest_neighbour(0.5),
      Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}}),
  };
  double worst = 0;
  for (int n = 5; n <= 10; ++n)
    for (const Kernel& kernel : kernels)
      for (int k = 1; k < n; ++k) {
        const ExactGenerator g = build_generator(SiteSpace::torus({n}), kernel, k);
        const Eigen::VectorXd mu = uniform_measure(g);
        worst = std::max(worst, (g.Q.transpose() * mu).cwiseAbs().maxCoeff());
      }
  res.pass = worst < 1e-10;
  res.detail = "max_residual=" + fmt(worst);
  return res;
}

// --- 6: simulated time-t law matches the matrix exponential. ----------------
inline CriterionResult finite_distribution_match(std::uint64_t seed) {
  CriterionResult res{6, "finite_distribution_match"};
  const SiteSpace space = SiteSpace::torus({5});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const Configuration eta0 = Configuration::from_bitstring("10100");
  const ExactGenerator g = build_generator(space, kernel, 2);
  const Eigen::VectorXd exact = expm_row(g, g.state_of(eta0), 1.0);
  const long replicas = 100000;
  std::vector<long> counts(g.n(), 0);
  const RngPlan base{sub_seed(seed, 6)};
  for (long r = 0; r < replicas; ++r) {
    const Trajectory traj = run_single(space, kernel, eta0, 1.0, base.replica(r));
    ++counts[g.state_of(traj.final_config)];
  }
  double tv = 0;
  for (int i = 0; i < g.n(); ++i) tv += std::abs(double(counts[i]) / replicas - exact(i));
  tv /= 2;
  res.pass = tv < 0.01;
  res.detail = "tv_distance=" + fmt(tv);
  return res;
}

// --- 7: the coupling preserves configuration ordering pathwise. -------------
inline CriterionResult pathwise_order_preservation(std::uint64_t seed) {
  CriterionResult res{7, "pathwise_order_preservation"};
  long violations = 0, events = 0;
  const std::vector<std::pair<SiteSpace, Kernel>> setups = {
      {SiteSpace::torus({6}), Kernel::nearest_neighbour(0.7)},
      {SiteSpace::torus({7}), Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}})},
  };
  for (std::size_t s = 0; s < setups.size(); ++s) {
    const auto& [space, kernel] = setups[s];
    for (long r = 0; r < 5000; ++r) {
      Stream pick(sub_seed(seed, 7, s, r));
      Configuration eta(space.size()), xi(space.size());
      for (Site i = 0; i < space.size(); ++i) {
        eta.set(i, pick.next_double() < 0.5);
        xi.set(i, eta(i) && pick.next_double() < 0.7);
      }
      const CoupledTrajectory traj = run_coupled(space, kernel, PairConfiguration(eta, xi), 2.0,
                                                 RngPlan{sub_seed(seed, 7, 1000 + s, r)});
      PairConfiguration pc = traj.initial;
      for (const CoupledEvent& e : traj.events) {
        apply_resolution(pc.eta, e.site, e.eta);
        apply_resolution(pc.xi, e.site, e.xi);
        ++events;
        if (!pc.xi.dominated_by(pc.eta)) ++violations;
      }
    }
  }
  res.pass = violations == 0;
  res.detail = "violations=" + std::to_string(violations) + " events=" + std::to_string(events);
  return res;
}

// --- 8: coupled runs are absorbed into the ordered set. ----------------------
inline CriterionResult coupled_ordering_absorption(std::uint64_t seed) {
  CriterionResult res{8, "coupled_ordering_absorption"};
  const ExactGenerator g =
      build_coupled_generator(SiteSpace::torus({4}), Kernel::nearest_neighbour(0.7));
  const OrderedAbsorptionReport rep = ordered_absorption_report(g);
  double unordered_mass = 0;
  for (const auto& row : rep.classes) unordered_mass += row.unordered_mass;

  const SiteSpace space = SiteSpace::torus({10});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const PairConfiguration pc0(Configuration::from_bitstring("1010101010"),
                              Configuration::from_bitstring("0101010101"));
  const OrderedFractionReport of =
      ordered_fraction(space, kernel, pc0, {50.0, 100.0, 200.0}, 2000, sub_seed(seed, 8));
  const double final_fraction = of.rows.back().fraction;

  res.pass = rep.ordered_closed && unordered_mass < 1e-8 && rep.min_hit_ordered > 1 - 1e-6 &&
             final_fraction >= 0.99;
  res.detail = "unordered_mass=" + fmt(unordered_mass) +
               " min_hit=" + fmt(rep.min_hit_ordered) +
               " fraction_t200=" + fmt(final_fraction);
  return res;
}

// --- 9: accumulated entry hazard is dominated by a unit exponential. --------
inline CriterionResult entry_hazard_tail(std::uint64_t seed) {
  CriterionResult res{9, "entry_hazard_tail"};
  const std::vector<double> grid = {0.5, 1.0, 2.0, 4.0};
  const long replicas = 100000;
  bool ok = true;
  double worst_gap = 0;

  // Two-state chain at unit rates: the hazard is exactly Exp(1).
  {
    const HazardTailReport rep =
        hazard_tail_test({{-1, 1}, {1, -1}}, 0, {1}, grid, replicas, sub_seed(seed, 9, 0));
    for (const auto& row : rep.rows) {
      const double dev = std::abs(row.empirical - row.bound);
      worst_gap = std::max(worst_gap, dev - 3 * row.se);
      if (dev > 3 * row.se + 1e-9) ok = false;
    }
  }
  // Random five-state chains: one-sided domination.
  for (int c = 1; c <= 5; ++c) {
    Stream pick(sub_seed(seed, 9, 100 + c));
    std::vector<std::vector<double>> Q(5, std::vector<double>(5, 0.0));
    for (int i = 0; i < 5; ++i) {
      double rowsum = 0;
      for (int j = 0; j < 5; ++j)
        if (j != i && pick.next_double() > 0.3) rowsum += Q[i][j] = 0.2 + 1.8 * pick.next_double();
      Q[i][i] = -rowsum;
    }
    const HazardTailReport rep = hazard_tail_test(Q, 0, {4}, grid, replicas, sub_seed(seed, 9, c));
    for (const auto& row : rep.rows) {
      if (!row.within) ok = false;
      worst_gap = std::max(worst_gap, row.empirical - row.bound - 3 * row.se);
    }
  }
  res.pass = ok;
  res.detail = "worst_gap_beyond_3se=" + fmt(worst_gap);
  return res;
}

// --- 10: integrated arrival rate is dominated by the compound tail. ---------
inline CriterionResult arrival_integral_criterion(std::uint64_t seed) {
  CriterionResult res{10, "arrival_integral_tail"};
  const SiteSpace space = SiteSpace::torus({12});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const std::vector<double> grid = {0.5, 1.0, 2.0, 4.0};
  bool ok = true;
  double worst = -1;
  std::string details;
  for (double rho : {0.3, 0.7}) {
    const ArrivalIntegralReport rep = arrival_integral_tail(
        space, kernel, 0, rho, grid, 30000, sub_seed(seed, 10, std::uint64_t(rho * 10)));
    for (const auto& row : rep.rows) {
      if (!row.within) ok = false;
      worst = std::max(worst, row.empirical - row.bound - 3 * row.se);
    }
    details += " mean[rho=" + fmt(rho) + "]=" + fmt(rep.mean_integral);
  }
  res.pass = ok;
  res.detail = "worst_gap_beyond_3se=" + fmt(worst) + details;
  return res;
}

// --- 11: range growth of the symmetric walk. --------------------------------
inline CriterionResult range_growth(std::uint64_t seed) {
  CriterionResult res{11, "range_growth"};
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.5}, {-1, 0.5}});
  bool ok = true;

  // Time to reach range k is k(k-1)/2 in expectation for the symmetric
  // nearest-neighbour walk (each extension is a strip exit). tau_2 = 1 holds
  // pathwise; a large run pins tau_3 to one percent of its mean of 3.
  const RangeReport fine = range_statistics(kernel, 3, {}, 1000000, sub_seed(seed, 11, 1));
  if (fine.tau_mean.at(2) != 1.0 || fine.tau_stderr.at(2) != 0.0) ok = false;
  const double tau3 = fine.tau_mean.at(3);
  if (std::abs(tau3 - 3.0) > 0.03) ok = false;

  // Out to range 30 the growth stays far below cubic, and the chance of a
  // range under k^(1/4) shrinks along the step grid from 16 steps on.
  const std::vector<int> grid = {1, 16, 81, 256, 1000};
  const RangeReport rep = range_statistics(kernel, 30, grid, 10000, sub_seed(seed, 11, 2));
  auto near = [&](int k, double expect) {
    if (std::abs(rep.tau_mean.at(k) - expect) > 3 * rep.tau_stderr.at(k) + 1e-12) ok = false;
  };
  near(8, 28.0);
  near(30, 435.0);
  double ratio = 0.0;
  for (int k = 2; k <= 30; ++k)
    ratio = std::max(ratio, rep.tau_mean.at(k) / (double(k) * double(k) * double(k)));
  if (ratio > 1.0) ok = false;
  double prev = 1.0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    if (grid[gi] < 16) continue;
    const double below = rep.prob_range_below(gi, std::pow(double(grid[gi]), 0.25));
    if (below > prev) ok = false;
    prev = below;
  }
  res.pass = ok;
  res.detail = "tau3=" + fmt(tau3) + " tau30=" + fmt(rep.tau_mean.at(30)) +
               " max_tau_over_k3=" + fmt(ratio);
  return res;
}

// --- 12: identical seeds give byte-identical outputs. ------------------------
inline CriterionResult deterministic_replay(std::uint64_t seed) {
  CriterionResult res{12, "deterministic_replay"};
  const SiteSpace space = SiteSpace::torus({6});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  const Configuration eta = Configuration::from_bitstring("110100");
  bool ok = true;

  auto rates_json = [&] {
    nlohmann::json arr = nlohmann::json::array();
    for (Site s = 0; s < space.size(); ++s)
      if (eta(s)) arr.push_back(io::rate_report_json(space, rate_report(space, kernel, s, eta)));
    return arr.dump(2);
  };
  ok = ok && rates_json() == rates_json();

  auto sim_csv = [&] {
    return io::events_csv(space,
                          run_single(space, kernel, eta, 5.0, RngPlan{sub_seed(seed, 12)}));
  };
  ok = ok && sim_csv() == sim_csv();

  const PairConfiguration pc(eta, Configuration::from_bitstring("010100"));
  auto coupled_csv = [&] {
    return io::coupled_events_csv(
        space, run_coupled(space, kernel, pc, 5.0, RngPlan{sub_seed(seed, 12, 1)}));
  };
  ok = ok && coupled_csv() == coupled_csv();

  auto family_json = [&] {
    return io::coupled_rates_json(space, coupled_rates(space, kernel, 0, pc)).dump(2);
  };
  ok = ok && family_json() == family_json();

  // Replica chunks merge to the same counts regardless of the split.
  const std::vector<double> times = {1.0, 2.0};
  const auto whole = ordered_fraction(space, kernel, pc, times, 20, sub_seed(seed, 12, 2));
  const auto first = ordered_fraction(space, kernel, pc, times, 10, sub_seed(seed, 12, 2), 0);
  const auto second = ordered_fraction(space, kernel, pc, times, 10, sub_seed(seed, 12, 2), 10);
  for (std::size_t i = 0; i < times.size(); ++i)
    ok = ok && whole.rows[i].ordered == first.rows[i].ordered + second.rows[i].ordered;

  res.pass = ok;
  res.detail = ok ? "byte_identical" : "divergence detected";
  return res;
}

}  // namespace detail

inline std::vector<CriterionResult> run_all(std::uint64_t seed = kDefaultSeed,
                                            const std::vector<int>& only = {}, int jobs = 1) {
  using Runner = CriterionResult (*)(std::uint64_t);
  const std::vector<Runner> runners = {
      detail::walk_rate_agreement,      detail::zero_mean_displacement,
      detail::coupling_marginals,       detail::product_measure_invariance,
      detail::shell_uniform_invariance, detail::finite_distribution_match,
      detail::pathwise_order_preservation, detail::coupled_ordering_absorption,
      detail::entry_hazard_tail,        detail::arrival_integral_criterion,
      detail::range_growth,             detail::deterministic_replay,
  };
  std::vector<int> ids;
  for (int i = 1; i <= static_cast<int>(runners.size()); ++i)
    if (only.empty() || std::find(only.begin(), only.end(), i) != only.end()) ids.push_back(i);

  std::vector<CriterionResult> results(ids.size());
  auto run_one = [&](std::size_t slot) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = runners[ids[slot] - 1](seed);
    } catch (const std::exception& e) {
      r.id = ids[slot];
      r.name = "criterion_" + std::to_string(ids[slot]);
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results[slot] = r;
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < ids.size(); ++i) run_one(i);
  } else {
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> next{0};
    for (int j = 0; j < jobs; ++j)
      futures.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next.fetch_add(1); i < ids.size(); i = next.fetch_add(1)) run_one(i);
      }));
    for (auto& f : futures) f.get();
  }
  return results;
}

inline std::string format_line(const CriterionResult& r) {
  std::ostringstream out;
  out << "C" << (r.id < 10 ? "0" : "") << r.id << " " << (r.pass ? "PASS" : "FAIL") << " "
      << r.name << " (" << io::format_double(r.seconds) << "s) " << r.detail;
  return out.str();
}

}  // namespace lrex::acceptance
