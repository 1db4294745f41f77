#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "lrex/walk.hpp"

using namespace lrex;

TEST_CASE("deterministic right mover has exact range times") {
  const Kernel kernel = Kernel::nearest_neighbour(1.0);
  const RangeReport rep = range_statistics(kernel, 6, {4}, 200, 99);
  for (int k = 2; k <= 6; ++k) {
    CHECK(rep.tau_mean.at(k) == double(k - 1));
    CHECK(rep.tau_stderr.at(k) == 0.0);
  }
  // After 4 steps the mover has seen exactly 5 sites.
  CHECK(rep.prob_range_below(0, 5.0) == 0.0);
  CHECK(rep.prob_range_below(0, 5.5) == 1.0);
}

TEST_CASE("symmetric walk range times match the strip-exit means") {
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.5}, {-1, 0.5}});
  const long replicas = 20000;
  const RangeReport rep = range_statistics(kernel, 5, {1, 4}, replicas, 7);
  CHECK(rep.tau_mean.at(2) == 1.0);
  CHECK(rep.tau_stderr.at(2) == 0.0);
  // Reaching range k takes k(k-1)/2 steps on average.
  CHECK(std::abs(rep.tau_mean.at(3) - 3.0) < 4 * rep.tau_stderr.at(3) + 1e-12);
  CHECK(std::abs(rep.tau_mean.at(5) - 10.0) < 4 * rep.tau_stderr.at(5) + 1e-12);
  // One step always discovers a second site.
  CHECK(rep.prob_range_below(0, 2.0) == 0.0);
  CHECK(rep.prob_range_below(0, 2.5) == 1.0);
  // Staying on two sites for four steps means alternating three times.
  const double two_after_four = rep.prob_range_below(1, 2.5);
  const double se = std::sqrt(0.125 * 0.875 / double(replicas));
  CHECK(std::abs(two_after_four - 0.125) < 4 * se + 1e-12);
}

TEST_CASE("range statistics reject bad arguments") {
  CHECK_THROWS_AS(range_statistics(Kernel::from_matrix({{0.0, 1.0}, {1.0, 0.0}}), 4, {}, 10, 1),
                  ValidationError);
  CHECK_THROWS_AS(range_statistics(Kernel::nearest_neighbour(0.5), 0, {}, 10, 1),
                  ValidationError);
}

TEST_CASE("escape probability is the drift for nearest-neighbour walks") {
  CHECK(escape_probability(Kernel::nearest_neighbour(0.7)) == Catch::Approx(0.4));
  CHECK(escape_probability(Kernel::nearest_neighbour(0.5)) == 0.0);
  CHECK_THROWS_AS(escape_probability(Kernel::from_offsets_1d({{2, 1.0}})), NotComputableError);
}

TEST_CASE("hitting splits evenly between adjacent absorbers on a ring") {
  const SiteSpace ring = SiteSpace::torus({4});
  const Kernel kernel = Kernel::nearest_neighbour(0.5);
  const HittingResult h = hitting_probability(ring, kernel, 0, {1}, {3});
  CHECK(h.target.at(1) == Catch::Approx(0.5));
  CHECK(h.forbidden.at(3) == Catch::Approx(0.5));
  CHECK(h.escape == 0.0);
  CHECK(h.vanish == 0.0);
  CHECK(h.target_total() == Catch::Approx(0.5));
}

TEST_CASE("hitting on an open segment matches the ruin formula") {
  // Target at coordinate 2, escape past the left edge at -2: starting from 0
  // the walk hits +2 before stepping out at -3 with probability 3/5.
  const SiteSpace seg = SiteSpace::segment(5, BoundaryPolicy::OpenEscape);
  const Kernel kernel = Kernel::nearest_neighbour(0.5);
  const HittingResult h = hitting_probability(seg, kernel, seg.site_at({0}), {seg.site_at({2})});
  CHECK(h.target.at(seg.site_at({2})) == Catch::Approx(0.6));
  CHECK(h.escape == Catch::Approx(0.4));
  CHECK(h.vanish == 0.0);
}

TEST_CASE("hitting rejects overlapping or empty site sets") {
  const SiteSpace ring = SiteSpace::torus({4});
  const Kernel kernel = Kernel::nearest_neighbour(0.5);
  CHECK_THROWS_AS(hitting_probability(ring, kernel, 0, {1}, {1}), ValidationError);
  CHECK_THROWS_AS(hitting_probability(ring, kernel, 0, {}), ValidationError);
}
