#include <catch2/catch_amalgamated.hpp>

#include "lrex/configuration.hpp"
#include "lrex/kernel.hpp"
#include "lrex/rng.hpp"
#include "lrex/site_space.hpp"

using namespace lrex;

TEST_CASE("torus coordinates are centered and wrap") {
  const SiteSpace space = SiteSpace::torus({8});
  CHECK(space.size() == 8);
  CHECK(space.coord1(0) == 0);
  CHECK(space.coord1(4) == 4);   // d/2 stays positive
  CHECK(space.coord1(5) == -3);  // beyond d/2 wraps negative
  for (Site s = 0; s < space.size(); ++s) CHECK(space.site_at(space.coords(s)) == s);
  CHECK(space.step(7, {1}) == 0);
  CHECK(space.step(0, {-1}) == 7);
  CHECK(space.site_at({-11}) == space.site_at({5}));
}

TEST_CASE("two-dimensional torus round-trips sites") {
  const SiteSpace space = SiteSpace::torus({4, 6});
  CHECK(space.size() == 24);
  CHECK(space.dimension() == 2);
  for (Site s = 0; s < space.size(); ++s) CHECK(space.site_at(space.coords(s)) == s);
  const Site corner = space.site_at({2, 3});
  CHECK(space.step(corner, {1, 1}) == space.site_at({-1, -2}));
}

TEST_CASE("segment coordinates and boundary exits") {
  const SiteSpace space = SiteSpace::segment(12, BoundaryPolicy::OpenEscape);
  CHECK(space.coord1(0) == -6);
  CHECK(space.coord1(11) == 5);
  CHECK(space.site_at({0}) == 6);
  CHECK(space.step(11, {1}) == -1);
  CHECK(space.step(0, {-1}) == -1);
  CHECK(space.site_at({6}) == -1);
  CHECK(space.describe() == "segment(12, open-escape)");
  CHECK(SiteSpace::torus({8}).describe() == "torus(8)");
  CHECK(SiteSpace::segment(5, BoundaryPolicy::OccupiedExterior).describe() ==
        "segment(5, occupied-exterior)");
}

TEST_CASE("window collects sites by coordinate") {
  const SiteSpace space = SiteSpace::segment(11, BoundaryPolicy::OpenEscape);
  const auto w = space.window(2);
  REQUIRE(w.size() == 5);
  for (Site s : w) CHECK(std::abs(space.coord1(s)) <= 2);
  CHECK(space.window(100).size() == 11);
}

TEST_CASE("space validation rejects degenerate shapes") {
  CHECK_THROWS_AS(SiteSpace::torus({1}), ValidationError);
  CHECK_THROWS_AS(SiteSpace::torus({}), ValidationError);
  CHECK_THROWS_AS(SiteSpace::segment(0), ValidationError);
}

TEST_CASE("kernel constructors validate their input") {
  CHECK_THROWS_AS(Kernel::from_offsets_1d({{0, 1.0}}), ValidationError);
  CHECK_THROWS_AS(Kernel::from_offsets_1d({{1, 0.4}, {-1, 0.4}}), ValidationError);
  CHECK_THROWS_AS(Kernel::from_offsets_1d({{1, 1.2}, {-1, -0.2}}), ValidationError);
  CHECK_THROWS_AS(Kernel::from_matrix({{0.0, 0.5}, {1.0, 0.0}}), ValidationError);
  CHECK_THROWS_AS(Kernel::nearest_neighbour(1.5), ValidationError);

  const Kernel nn = Kernel::nearest_neighbour(0.7);
  REQUIRE(nn.nn_right().has_value());
  CHECK(*nn.nn_right() == 0.7);
  CHECK(nn.mean_offset()[0] == Catch::Approx(0.4).margin(1e-15));

  const Kernel lr = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  CHECK_FALSE(lr.nn_right().has_value());
  CHECK(lr.mean_offset()[0] == Catch::Approx(0.9).margin(1e-15));
  CHECK(lr.reversed().mean_offset()[0] == Catch::Approx(-0.9).margin(1e-15));
}

TEST_CASE("kernel json round trip") {
  const Kernel lr = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  const Kernel back = Kernel::from_json(lr.to_json());
  CHECK(back.offsets() == lr.offsets());

  CHECK_THROWS_AS(Kernel::from_json(nlohmann::json{{"offsets", 1}, {"matrix", 2}}),
                  ValidationError);
  CHECK_THROWS_AS(Kernel::from_json(nlohmann::json::object()), ValidationError);

  const Kernel m =
      Kernel::from_matrix({{0.0, 0.4, 0.6}, {0.5, 0.0, 0.5}, {0.2, 0.8, 0.0}});
  const Kernel mback = Kernel::from_json(m.to_json());
  CHECK(mback.matrix() == m.matrix());
}

TEST_CASE("kernel rows on a torus merge wrapped offsets") {
  const SiteSpace space = SiteSpace::torus({5});
  // +3 and -2 land on the same site mod 5.
  const Kernel lr = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  const KernelRow row = lr.row(space, 0);
  REQUIRE(row.targets.size() == 2);
  double at3 = 0;
  for (const auto& [site, p] : row.targets)
    if (site == 3) at3 = p;
  CHECK(at3 == Catch::Approx(0.7).margin(1e-15));
}

TEST_CASE("matrix kernels are tied to one space size") {
  const Kernel m = Kernel::from_matrix({{0.0, 1.0}, {1.0, 0.0}});
  CHECK_NOTHROW(m.validate_on(SiteSpace::torus({2})));
  CHECK_THROWS_AS(m.validate_on(SiteSpace::torus({3})), ValidationError);
}

TEST_CASE("configurations support the lattice operations") {
  const Configuration c = Configuration::from_bitstring("10110");
  CHECK(c.size() == 5);
  CHECK(c.count() == 3);
  CHECK(c.bitstring() == "10110");
  CHECK(c(0));
  CHECK_FALSE(c(1));
  CHECK(c.occupied_sites() == std::vector<Site>{0, 2, 3});

  const Configuration moved = c.swapped(0, 1);
  CHECK(moved.bitstring() == "01110");
  CHECK(c.killed(2).bitstring() == "10010");

  const Configuration sub = Configuration::from_bitstring("00110");
  CHECK(sub.dominated_by(c));
  CHECK_FALSE(c.dominated_by(sub));
  CHECK(product(c, sub).bitstring() == "00110");

  CHECK_THROWS_AS(Configuration::from_bitstring("10x"), ValidationError);
}

TEST_CASE("pair configurations expose discrepancies and ordering") {
  const PairConfiguration pc(Configuration::from_bitstring("1100"),
                             Configuration::from_bitstring("0110"));
  CHECK(pc.d(0) == 1);
  CHECK(pc.d(1) == 0);
  CHECK(pc.d(2) == -1);
  CHECK_FALSE(pc.ordered());
  CHECK(pc.both().bitstring() == "0100");

  const PairConfiguration op(Configuration::from_bitstring("1110"),
                             Configuration::from_bitstring("0110"));
  CHECK(op.ordered());
}

TEST_CASE("streams are reproducible and keyed independently") {
  Stream a(42), b(42), c(43);
  bool same = true, diff = false;
  for (int i = 0; i < 16; ++i) {
    const uint64_t va = a.next_u64();
    same = same && va == b.next_u64();
    diff = diff || va != c.next_u64();
  }
  CHECK(same);
  CHECK(diff);

  CHECK(derive_key(1, 2, 3) == derive_key(1, 2, 3));
  CHECK(derive_key(1, 2, 3) != derive_key(1, 2, 4));
  CHECK(derive_key(1, 2, 3) != derive_key(2, 2, 3));
}

TEST_CASE("stream doubles stay in range and match their kernel frequencies") {
  Stream rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.next_open_double();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }

  const Kernel nn = Kernel::nearest_neighbour(0.7);
  const SiteSpace space = SiteSpace::torus({10});
  long right = 0;
  const long draws = 100000;
  Stream sampler(11);
  for (long i = 0; i < draws; ++i) right += nn.sample_step(space, 0, sampler) == 1;
  const double freq = double(right) / draws;
  CHECK(std::abs(freq - 0.7) < 3 * std::sqrt(0.7 * 0.3 / draws));
}

TEST_CASE("cdf sampling hits every bin with the right mass") {
  Stream rng(5);
  const std::vector<double> cdf{0.25, 0.5, 1.0};
  std::vector<long> counts(3, 0);
  const long draws = 60000;
  for (long i = 0; i < draws; ++i) ++counts[rng.next_from_cdf(cdf)];
  CHECK(std::abs(double(counts[0]) / draws - 0.25) < 0.01);
  CHECK(std::abs(double(counts[1]) / draws - 0.25) < 0.01);
  CHECK(std::abs(double(counts[2]) / draws - 0.5) < 0.01);
}

TEST_CASE("bernoulli configurations are seed-deterministic") {
  Stream a(9), b(9);
  const Configuration ca = Configuration::bernoulli(20, 0.4, a);
  const Configuration cb = Configuration::bernoulli(20, 0.4, b);
  CHECK(ca.bitstring() == cb.bitstring());
}
