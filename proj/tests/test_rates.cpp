#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "lrex/rates.hpp"

using namespace lrex;

namespace {

struct IteratedStops {
  std::map<Site, double> stop;
  double cancel = 0;
  double exited = 0;    // open-boundary exits
  double leftover = 0;  // mass still walking after the iteration budget
};

// Independent oracle: push walk mass through the kernel one step at a time.
// Mass stopping at a vacancy (or returning to the source under the jump
// rule) accumulates; whatever is still moving after `steps` iterations
// bounds the truncation error of every accumulated entry.
IteratedStops iterate_stops(const SiteSpace& space, const Kernel& kernel, Site x,
                            const Configuration& config, bool jump_rule, int steps) {
  IteratedStops out;
  std::vector<double> mass(space.size(), 0.0), next(space.size(), 0.0);
  mass[x] = 1.0;
  for (int iter = 0; iter < steps; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    double moving = 0;
    for (Site s = 0; s < space.size(); ++s) {
      if (mass[s] == 0.0) continue;
      const KernelRow row = kernel.row(space, s);
      for (const auto& [t, p] : row.targets) {
        const double m = mass[s] * p;
        if (jump_rule && t == x && iter > 0) {
          out.cancel += m;
        } else if (!config(t)) {
          out.stop[t] += m;
        } else {
          next[t] += m;
          moving += m;
        }
      }
      out.exited += mass[s] * row.exit_mass();
    }
    mass.swap(next);
    if (moving < 1e-15) break;
  }
  for (double m : mass) out.leftover += m;
  return out;
}

void compare_with_oracle(const SiteSpace& space, const Kernel& kernel, Site x,
                         const Configuration& config, int steps = 4000) {
  const RateReport exact = rate_report(space, kernel, x, config);
  for (bool jump_rule : {true, false}) {
    const StopReport& er = jump_rule ? exact.jump : exact.free;
    const IteratedStops oracle = iterate_stops(space, kernel, x, config, jump_rule, steps);
    const double tol = oracle.leftover + 1e-11;
    for (Site s = 0; s < space.size(); ++s) {
      const auto it = oracle.stop.find(s);
      const double want = it == oracle.stop.end() ? 0.0 : it->second;
      INFO("site " << s << (jump_rule ? " jump" : " free"));
      CHECK(std::abs(er.stop_at(s) - want) <= tol);
    }
    if (jump_rule) CHECK(std::abs(er.cancel - oracle.cancel) <= tol);
    CHECK(std::abs((er.vanish + er.escape) - (oracle.exited + oracle.leftover)) <= tol);
    CHECK(er.move_total() + er.cancel + er.vanish + er.escape ==
          Catch::Approx(1.0).margin(1e-10));
  }
}

Configuration random_config(const SiteSpace& space, Stream& rng, Site forced) {
  Configuration c(space.size());
  for (Site s = 0; s < space.size(); ++s) c.set(s, rng.next_double() < 0.5);
  c.set(forced, 1);
  bool vacancy = false;
  for (Site s = 0; s < space.size(); ++s) vacancy = vacancy || !c(s);
  if (!vacancy) c.set((forced + 1) % space.size(), 0);
  return c;
}

}  // namespace

TEST_CASE("first-stop rates match the mass-iteration oracle on a torus") {
  const SiteSpace space = SiteSpace::torus({10});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  Stream rng(2024);
  for (int c = 0; c < 30; ++c) {
    const Site x = static_cast<Site>(rng.next_below(space.size()));
    compare_with_oracle(space, kernel, x, random_config(space, rng, x));
  }
}

TEST_CASE("first-stop rates match the oracle on open segments") {
  const SiteSpace space = SiteSpace::segment(12, BoundaryPolicy::OpenEscape);
  Stream rng(77);
  for (const Kernel& kernel :
       {Kernel::nearest_neighbour(0.7), Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}})}) {
    for (int c = 0; c < 20; ++c) {
      const Site x = static_cast<Site>(rng.next_below(space.size()));
      compare_with_oracle(space, kernel, x, random_config(space, rng, x));
    }
  }
}

TEST_CASE("first-stop rates match the oracle for matrix kernels") {
  const SiteSpace space = SiteSpace::torus({6});
  Stream rng(31);
  std::vector<std::vector<double>> m(6, std::vector<double>(6, 0.0));
  for (int i = 0; i < 6; ++i) {
    double total = 0;
    for (int j = 0; j < 6; ++j)
      if (j != i) total += m[i][j] = 0.05 + rng.next_double();
    for (int j = 0; j < 6; ++j) m[i][j] /= total;
  }
  const Kernel kernel = Kernel::from_matrix(m);
  for (int c = 0; c < 12; ++c) {
    const Site x = static_cast<Site>(rng.next_below(space.size()));
    compare_with_oracle(space, kernel, x, random_config(space, rng, x));
  }
}

TEST_CASE("occupied-exterior windows reproduce infinite-lattice values") {
  // Embed the window in a much longer open segment whose padding is fully
  // occupied; the padded iteration is an independent model of the same walk.
  const int pad = 80;
  const SiteSpace window = SiteSpace::segment(9, BoundaryPolicy::OccupiedExterior);
  const SiteSpace padded = SiteSpace::segment(9 + 2 * pad, BoundaryPolicy::OpenEscape);
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  Stream rng(55);
  for (int c = 0; c < 8; ++c) {
    const Site x = static_cast<Site>(rng.next_below(window.size()));
    const Configuration inner = random_config(window, rng, x);
    Configuration big(padded.size());
    for (Site s = 0; s < padded.size(); ++s) big.set(s, 1);
    for (Site s = 0; s < window.size(); ++s) big.set(pad + s, inner(s));

    const RateReport exact = rate_report(window, kernel, x, inner);
    for (bool jump_rule : {true, false}) {
      const StopReport& er = jump_rule ? exact.jump : exact.free;
      const IteratedStops oracle =
          iterate_stops(padded, kernel, pad + x, big, jump_rule, 40000);
      const double tol = oracle.leftover + 1e-9;
      for (Site s = 0; s < window.size(); ++s) {
        const auto it = oracle.stop.find(pad + s);
        const double want = it == oracle.stop.end() ? 0.0 : it->second;
        INFO("site " << s << (jump_rule ? " jump" : " free"));
        CHECK(std::abs(er.stop_at(s) - want) <= tol);
      }
      if (jump_rule) CHECK(std::abs(er.cancel - oracle.cancel) <= tol);
      CHECK(std::abs(er.vanish - (oracle.exited + oracle.leftover)) <= tol);
    }
  }
}

TEST_CASE("stopping through an occupied run matches the closed form") {
  // Sites 4,5,6 occupied, 3 and 7 vacant, biased walk p=0.7. A left first
  // step stops immediately; a right first step either crosses the run or
  // returns to the source and cancels.
  const SiteSpace space = SiteSpace::segment(12, BoundaryPolicy::OpenEscape);
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  Configuration eta(space.size());
  for (Site s : {4, 5, 6}) eta.set(s, 1);

  const StopReport rep = jump_stop_report(space, kernel, 4, eta);
  CHECK(rep.stop_at(3) == Catch::Approx(0.3).margin(1e-12));
  // Crossing probability from gambler's ruin with ratio r = 0.3/0.7:
  // 0.7 * (1 - r) / (1 - r^3) = 49/79 after the first step.
  CHECK(rep.stop_at(7) == Catch::Approx(34.3 / 79.0).margin(1e-12));
  CHECK(rep.cancel == Catch::Approx(21.0 / 79.0).margin(1e-12));
  CHECK(rep.vanish == Catch::Approx(0.0).margin(1e-12));
  CHECK(rep.escape == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("fully occupied occupied-exterior window has the drift vanish rate") {
  const SiteSpace space = SiteSpace::segment(5, BoundaryPolicy::OccupiedExterior);
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const Configuration full = Configuration::full(space.size());

  // The walk lives on a fully occupied line: it either returns to its start
  // (probability 1 - |p - q|) or drifts away forever.
  const StopReport jump = jump_stop_report(space, kernel, 2, full);
  CHECK(jump.cancel == Catch::Approx(0.6).margin(1e-10));
  CHECK(jump.vanish == Catch::Approx(0.4).margin(1e-10));
  CHECK(jump.move_total() == Catch::Approx(0.0).margin(1e-12));
  CHECK(delta_rate(space, kernel, 2, full) == Catch::Approx(0.4).margin(1e-10));

  // Without cancellation nothing ever stops.
  const StopReport free = free_stop_report(space, kernel, 2, full);
  CHECK(free.vanish == Catch::Approx(1.0).margin(1e-10));
  CHECK(free.move_total() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("vanish rate is zero when the source is vacant") {
  const SiteSpace space = SiteSpace::torus({6});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const Configuration eta = Configuration::from_bitstring("011000");
  CHECK(delta_rate(space, kernel, 0, eta) == 0.0);
}

TEST_CASE("free rates dominate jump rates toward vacancies") {
  const SiteSpace space = SiteSpace::torus({9});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  Stream rng(12);
  for (int c = 0; c < 20; ++c) {
    const Site x = static_cast<Site>(rng.next_below(space.size()));
    const Configuration eta = random_config(space, rng, x);
    for (Site y = 0; y < space.size(); ++y) {
      if (y == x || eta(y)) continue;
      CHECK(q_bar_rate(space, kernel, x, y, eta) >=
            q_rate(space, kernel, x, y, eta) - 1e-12);
    }
  }
}

TEST_CASE("arrival rate aggregates the per-source stop rates") {
  const SiteSpace space = SiteSpace::torus({8});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  const Configuration eta = Configuration::from_bitstring("11010010");
  const Site target = 2;
  REQUIRE_FALSE(eta(target));
  double expect = 0;
  for (Site z = 0; z < space.size(); ++z)
    if (eta(z)) expect += jump_stop_report(space, kernel, z, eta).stop_at(target);
  CHECK(arrival_rate(space, kernel, target, eta) == Catch::Approx(expect).margin(1e-14));
}

TEST_CASE("generator terms match per-site rate sums") {
  const SiteSpace space = SiteSpace::torus({5});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const Configuration eta = Configuration::from_bitstring("11010");

  // Gain into a single vacancy.
  const GeneratorTerms gain = generator_apply(space, kernel, {2}, eta);
  double expect_gain = 0;
  for (Site x : eta.occupied_sites()) expect_gain += q_rate(space, kernel, x, 2, eta);
  CHECK(gain.gain == Catch::Approx(expect_gain).margin(1e-14));

  // Loss out of a fully occupied set.
  const GeneratorTerms loss = generator_apply(space, kernel, {0, 1}, eta);
  double expect_loss = 0;
  for (Site x : {0, 1}) {
    const StopReport rep = jump_stop_report(space, kernel, x, eta);
    expect_loss += rep.move_total() + rep.vanish + rep.escape;
  }
  CHECK(loss.loss == Catch::Approx(expect_loss).margin(1e-14));
}

TEST_CASE("displacement sums are exact for zero-mean kernels") {
  const SiteSpace space = SiteSpace::segment(21, BoundaryPolicy::OpenEscape);
  const Kernel sym = Kernel::from_offsets_1d({{1, 0.5}, {-1, 0.5}});
  const Kernel skew = Kernel::from_offsets_1d({{2, 1.0 / 3.0}, {-1, 2.0 / 3.0}});
  Stream rng(4);
  for (int c = 0; c < 20; ++c) {
    Configuration eta(space.size());
    std::vector<Site> support;
    for (Site s = 0; s < space.size(); ++s)
      if (std::abs(space.coord1(s)) <= 5 && rng.next_double() < 0.6) {
        eta.set(s, 1);
        support.push_back(s);
      }
    if (support.empty()) continue;
    const Site x = support[rng.next_below(support.size())];
    for (const Kernel& kernel : {sym, skew})
      for (RateVariant variant : {RateVariant::Jump, RateVariant::Free}) {
        const DisplacementSum d = displacement_sum(space, kernel, x, eta, variant);
        CHECK(std::abs(d.signed_sum) < 1e-12);
        CHECK(d.absolute_sum >= 0.0);
      }
  }
}

TEST_CASE("displacement sums reject wrapping and leaking geometries") {
  const Kernel kernel = Kernel::nearest_neighbour(0.5);
  const Configuration ring = Configuration::from_bitstring("10100");
  CHECK_THROWS_AS(displacement_sum(SiteSpace::torus({5}), kernel, 0, ring, RateVariant::Jump),
                  ValidationError);

  // A source at the open edge leaks mass outside, where displacement is
  // no longer accounted for.
  const SiteSpace space = SiteSpace::segment(5, BoundaryPolicy::OpenEscape);
  const Configuration edge = Configuration::from_bitstring("10000");
  CHECK_THROWS_AS(displacement_sum(space, kernel, 0, edge, RateVariant::Jump), ValidationError);
}
