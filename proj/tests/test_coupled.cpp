#include <catch2/catch_amalgamated.hpp>

#include "lrex/coupled.hpp"
#include "lrex/stats.hpp"

using namespace lrex;

namespace {

PairConfiguration random_pair(const SiteSpace& space, Stream& rng, double rho = 0.5) {
  Configuration eta(space.size()), xi(space.size());
  for (Site s = 0; s < space.size(); ++s) {
    eta.set(s, rng.next_double() < rho);
    xi.set(s, rng.next_double() < rho);
  }
  return PairConfiguration(eta, xi);
}

const std::vector<std::pair<SiteSpace, Kernel>>& coupled_setups() {
  static const std::vector<std::pair<SiteSpace, Kernel>> setups = {
      {SiteSpace::torus({8}), Kernel::nearest_neighbour(0.7)},
      {SiteSpace::torus({8}), Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}})},
      {SiteSpace::segment(9, BoundaryPolicy::OpenEscape), Kernel::nearest_neighbour(0.6)},
      {SiteSpace::segment(9, BoundaryPolicy::OccupiedExterior), Kernel::nearest_neighbour(0.7)},
  };
  return setups;
}

}  // namespace

TEST_CASE("coupled families carry the full unit of clock mass") {
  Stream rng(101);
  for (const auto& [space, kernel] : coupled_setups()) {
    for (int c = 0; c < 25; ++c) {
      const PairConfiguration pc = random_pair(space, rng);
      for (Site x = 0; x < space.size(); ++x) {
        const CoupledRates cr = coupled_rates(space, kernel, x, pc);
        if (!pc.eta(x) && !pc.xi(x)) {
          CHECK(cr.total() == 0.0);
        } else {
          INFO(space.describe() << " x=" << x << " eta=" << pc.eta.bitstring()
                                << " xi=" << pc.xi.bitstring());
          CHECK(cr.total() == Catch::Approx(1.0).margin(1e-10));
        }
      }
    }
  }
}

TEST_CASE("family rates sit on structurally consistent targets") {
  Stream rng(17);
  const SiteSpace space = SiteSpace::torus({8});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  for (int c = 0; c < 40; ++c) {
    const PairConfiguration pc = random_pair(space, rng);
    for (Site x = 0; x < space.size(); ++x) {
      const CoupledRates cr = coupled_rates(space, kernel, x, pc);
      for (const auto& [y, r] : cr.both_jump) {
        CHECK_FALSE(pc.eta(y));
        CHECK_FALSE(pc.xi(y));
        CHECK(r >= 0.0);
      }
      for (const auto& [yz, r] : cr.eta_jump_xi_continue) {
        const auto [y, z] = yz;
        CHECK_FALSE(pc.eta(y));   // first copy stops on its own vacancy
        CHECK(pc.xi(y));          // which the second copy sees occupied
        CHECK_FALSE(pc.xi(z));    // the continuation ends on a real vacancy
        CHECK(z != x);            // a late return is the cancel family
        CHECK(r >= 0.0);
      }
      for (const auto& [yz, r] : cr.xi_jump_eta_continue) {
        const auto [y, z] = yz;
        CHECK_FALSE(pc.xi(y));
        CHECK(pc.eta(y));
        CHECK_FALSE(pc.eta(z));
        CHECK(z != x);
        CHECK(r >= 0.0);
      }
      for (const auto& [y, r] : cr.eta_alone) {
        CHECK(pc.eta(x));
        CHECK_FALSE(pc.xi(x));
        CHECK_FALSE(pc.eta(y));
        CHECK(r >= 0.0);
      }
      for (const auto& [y, r] : cr.xi_alone) {
        CHECK(pc.xi(x));
        CHECK_FALSE(pc.eta(x));
        CHECK_FALSE(pc.xi(y));
        CHECK(r >= 0.0);
      }
      CHECK(cr.cancel >= 0.0);
      CHECK(cr.both_vanish >= 0.0);
    }
  }
}

TEST_CASE("family labels expose the numbered decomposition") {
  CHECK(family_label(CoupledFamily::BothJump) == "family_2");
  CHECK(family_label(CoupledFamily::EtaJumpXiContinue) == "family_3");
  CHECK(family_label(CoupledFamily::XiJumpEtaContinue) == "family_4");
  CHECK(family_label(CoupledFamily::EtaJumpXiCancel) == "family_5");
  CHECK(family_label(CoupledFamily::XiJumpEtaCancel) == "family_6");
  CHECK(family_label(CoupledFamily::EtaAlone) == "family_7");
  CHECK(family_label(CoupledFamily::XiAlone) == "family_8");
  CHECK(family_label(CoupledFamily::EtaJumpXiVanish) == "family_9");
  CHECK(family_label(CoupledFamily::XiJumpEtaVanish) == "family_10");
  CHECK(family_label(CoupledFamily::EtaVanish) == "family_11");
  CHECK(family_label(CoupledFamily::XiVanish) == "family_12");
  CHECK(family_label(CoupledFamily::BothVanish) == "family_13");
}

TEST_CASE("summing coupled families recovers both marginal processes") {
  Stream rng(23);
  for (const auto& [space, kernel] : coupled_setups()) {
    for (int c = 0; c < 30; ++c) {
      PairConfiguration pc = random_pair(space, rng);
      const Site x = static_cast<Site>(rng.next_below(space.size()));
      pc.eta.set(x, 1);
      pc.xi.set(x, 1);
      Site y = static_cast<Site>(rng.next_below(space.size()));
      while (y == x) y = static_cast<Site>(rng.next_below(space.size()));
      pc.eta.set(y, 0);

      const MarginalResiduals mr = marginal_consistency_check(space, kernel, pc, x, y);
      INFO(space.describe() << " x=" << x << " y=" << y);
      CHECK(std::abs(mr.move_residual) < 1e-11);
      CHECK(std::abs(mr.vanish_residual) < 1e-11);
    }
  }
}

TEST_CASE("discrepancy functionals are ordered and nonnegative") {
  Stream rng(29);
  const SiteSpace space = SiteSpace::torus({8});
  for (const Kernel& kernel :
       {Kernel::nearest_neighbour(0.7), Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}})}) {
    for (int c = 0; c < 30; ++c) {
      PairConfiguration pc = random_pair(space, rng);
      // A positive discrepancy at the source, a shared vacancy at the target.
      const Site x = static_cast<Site>(rng.next_below(space.size()));
      pc.eta.set(x, 1);
      pc.xi.set(x, 0);
      Site y = static_cast<Site>(rng.next_below(space.size()));
      while (y == x) y = static_cast<Site>(rng.next_below(space.size()));
      pc.eta.set(y, 0);
      pc.xi.set(y, 0);

      const double a = discrepancy_a(space, kernel, pc, x, y);
      const double b = discrepancy_b(space, kernel, pc, x, y);
      const double cval = discrepancy_c(space, kernel, pc.eta, x, y);
      CHECK(a >= -1e-14);
      CHECK(a <= b + 1e-12);
      CHECK(b <= cval + 1e-12);
      CHECK(discrepancy_d(space, kernel, pc, x, y) >= -1e-14);
    }
  }
}

TEST_CASE("global positive discrepancy count never drifts upward") {
  // Discrepancies move or annihilate under the coupling, so the expected
  // change of their total number is never positive.
  Stream rng(37);
  for (const auto& [space, kernel] : coupled_setups()) {
    if (space.is_segment()) continue;  // counts are only conserved on tori
    for (int c = 0; c < 20; ++c) {
      const PairConfiguration pc = random_pair(space, rng);
      const SignedGeneratorTerms terms = coupled_generator_apply(
          space, kernel, pc, [&](const PairConfiguration& next) {
            int count = 0;
            for (Site s = 0; s < space.size(); ++s) count += next.d(s) == 1;
            return double(count);
          });
      CHECK(terms.value() <= 1e-11);
    }
  }
}

TEST_CASE("particle count drift equals the negative vanish rates") {
  Stream rng(41);
  const SiteSpace space = SiteSpace::torus({7});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  for (int c = 0; c < 20; ++c) {
    const PairConfiguration pc = random_pair(space, rng);
    const SignedGeneratorTerms terms = coupled_generator_apply(
        space, kernel, pc,
        [](const PairConfiguration& next) { return double(next.eta.count()); });
    double expect = 0;
    for (Site x = 0; x < space.size(); ++x) expect -= delta_rate(space, kernel, x, pc.eta);
    CHECK(terms.value() == Catch::Approx(expect).margin(1e-11));
  }
}

TEST_CASE("transition enumeration conserves rate mass against the reports") {
  Stream rng(43);
  for (const auto& [space, kernel] : coupled_setups()) {
    for (int c = 0; c < 15; ++c) {
      const PairConfiguration pc = random_pair(space, rng);
      std::map<Site, double> enumerated;
      for_each_coupled_transition(space, kernel, pc,
                                  [&](const PairConfiguration&, double rate, CoupledFamily,
                                      Site source, Site, Site) { enumerated[source] += rate; });
      // Everything except the both-cancel no-op is emitted, escape included.
      for (Site x = 0; x < space.size(); ++x) {
        if (!pc.eta(x) && !pc.xi(x)) continue;
        const CoupledRates cr = coupled_rates(space, kernel, x, pc);
        INFO(space.describe() << " x=" << x);
        CHECK(enumerated[x] == Catch::Approx(cr.total() - cr.cancel).margin(1e-11));
      }
    }
  }
}

TEST_CASE("lone copies fall back to single-copy reports") {
  const SiteSpace space = SiteSpace::torus({8});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  const Configuration eta = Configuration::from_bitstring("10110010");
  const Configuration xi = Configuration::from_bitstring("00110010");
  const PairConfiguration pc(eta, xi);
  // Site 0 holds a particle only in the first copy.
  const CoupledRates cr = coupled_rates(space, kernel, 0, pc);
  const StopReport single = jump_stop_report(space, kernel, 0, eta);
  for (const auto& [y, r] : cr.eta_alone)
    CHECK(r == Catch::Approx(single.stop_at(y)).margin(1e-13));
  CHECK(cr.eta_vanish == Catch::Approx(single.vanish).margin(1e-13));
  CHECK(cr.xi_alone.empty());
  CHECK(cr.both_jump.empty());
}
