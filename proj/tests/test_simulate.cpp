#include <catch2/catch_amalgamated.hpp>

#include "lrex/io.hpp"
#include "lrex/simulate.hpp"

using namespace lrex;

TEST_CASE("zigzag encoding interleaves signs") {
  CHECK(RngPlan::zigzag(0) == 0);
  CHECK(RngPlan::zigzag(-1) == 1);
  CHECK(RngPlan::zigzag(1) == 2);
  CHECK(RngPlan::zigzag(-2) == 3);
  CHECK(RngPlan::zigzag(2) == 4);
}

TEST_CASE("site keys depend on coordinates, not window size") {
  const SiteSpace small = SiteSpace::segment(7, BoundaryPolicy::OpenEscape);
  const SiteSpace large = SiteSpace::segment(13, BoundaryPolicy::OpenEscape);
  for (int c = -3; c <= 3; ++c) {
    CHECK(RngPlan::site_key(small, small.site_at({c})) ==
          RngPlan::site_key(large, large.site_at({c})));
  }
  CHECK(RngPlan::site_key(small, small.site_at({1})) !=
        RngPlan::site_key(small, small.site_at({-1})));
}

TEST_CASE("runs with one seed are identical, with different seeds distinct") {
  const SiteSpace space = SiteSpace::torus({8});
  const Kernel kernel = Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}});
  const Configuration eta0 = Configuration::from_bitstring("10110010");

  const Trajectory a = run_single(space, kernel, eta0, 4.0, RngPlan{99});
  const Trajectory b = run_single(space, kernel, eta0, 4.0, RngPlan{99});
  const Trajectory c = run_single(space, kernel, eta0, 4.0, RngPlan{100});

  CHECK(io::events_csv(space, a) == io::events_csv(space, b));
  CHECK(io::events_csv(space, a) != io::events_csv(space, c));
  CHECK(a.final_config.bitstring() == b.final_config.bitstring());
}

TEST_CASE("a coupled run reproduces both single runs pathwise") {
  // Clocks and walks are keyed by site, ring and master seed alone; each
  // marginal of a coupled run must therefore replay its own single run.
  const std::vector<std::pair<SiteSpace, Kernel>> setups = {
      {SiteSpace::torus({8}), Kernel::from_offsets_1d({{1, 0.3}, {3, 0.4}, {-2, 0.3}})},
      {SiteSpace::torus({6}), Kernel::nearest_neighbour(0.7)},
  };
  for (const auto& [space, kernel] : setups) {
    for (std::uint64_t seed : {7ULL, 1234ULL}) {
      Stream pick(seed);
      Configuration eta(space.size()), xi(space.size());
      for (Site s = 0; s < space.size(); ++s) {
        eta.set(s, pick.next_double() < 0.6);
        xi.set(s, eta(s) && pick.next_double() < 0.6);
      }
      const RngPlan plan{seed};
      const CoupledTrajectory both = run_coupled(space, kernel, {eta, xi}, 3.0, plan);
      const Trajectory eta_only = run_single(space, kernel, eta, 3.0, plan);
      const Trajectory xi_only = run_single(space, kernel, xi, 3.0, plan);
      CHECK(both.final_pair.eta.bitstring() == eta_only.final_config.bitstring());
      CHECK(both.final_pair.xi.bitstring() == xi_only.final_config.bitstring());
    }
  }
}

TEST_CASE("coupled runs preserve configuration ordering") {
  const SiteSpace space = SiteSpace::torus({6});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  Stream pick(5);
  for (int r = 0; r < 200; ++r) {
    Configuration eta(space.size()), xi(space.size());
    for (Site s = 0; s < space.size(); ++s) {
      eta.set(s, pick.next_double() < 0.5);
      xi.set(s, eta(s) && pick.next_double() < 0.7);
    }
    const CoupledTrajectory traj =
        run_coupled(space, kernel, {eta, xi}, 2.0, RngPlan{derive_key(5, 50, r)});
    PairConfiguration pc = traj.initial;
    for (const CoupledEvent& e : traj.events) {
      apply_resolution(pc.eta, e.site, e.eta);
      apply_resolution(pc.xi, e.site, e.xi);
      REQUIRE(pc.xi.dominated_by(pc.eta));
    }
  }
}

TEST_CASE("trajectory replay matches the recorded endpoints") {
  const SiteSpace space = SiteSpace::torus({8});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const Configuration eta0 = Configuration::from_bitstring("11010010");
  const Trajectory traj = run_single(space, kernel, eta0, 5.0, RngPlan{321});
  CHECK(traj.at(0.0).bitstring() == eta0.bitstring());
  CHECK(traj.at(5.0).bitstring() == traj.final_config.bitstring());
  if (!traj.events.empty()) {
    const double first = traj.events.front().time;
    CHECK(traj.at(first / 2).bitstring() == eta0.bitstring());
  }
}

TEST_CASE("deterministic kernels resolve events exactly") {
  // p(x, x+1) = 1: every walk marches right to the first vacancy.
  const Kernel right = Kernel::from_offsets_1d({{1, 1.0}});

  const SiteSpace open = SiteSpace::segment(3, BoundaryPolicy::OpenEscape);
  const Trajectory t1 =
      run_single(open, right, Configuration::from_bitstring("110"), 0.5, RngPlan{8});
  for (const Event& e : t1.events) {
    if (e.site == 0 || e.site == 1) {
      CHECK(e.outcome == EventOutcome::JumpTo);
      break;  // after the first jump the configuration has shifted
    }
  }

  // Fully occupied, open right edge: the first walk leaves and never stops.
  // Later ticks may jump into the vacancies the disappearances leave behind.
  const Trajectory t2 =
      run_single(open, right, Configuration::from_bitstring("111"), 0.5, RngPlan{8});
  if (!t2.events.empty()) CHECK(t2.events.front().outcome == EventOutcome::Disappeared);

  // Occupied exterior, pure drift: the excursion never returns either.
  const SiteSpace closed = SiteSpace::segment(3, BoundaryPolicy::OccupiedExterior);
  const Trajectory t3 =
      run_single(closed, right, Configuration::from_bitstring("111"), 0.5, RngPlan{8});
  if (!t3.events.empty()) CHECK(t3.events.front().outcome == EventOutcome::Disappeared);
}

TEST_CASE("step caps convert long walks into explicit cap events") {
  const SiteSpace space = SiteSpace::torus({4});
  const Kernel right = Kernel::from_offsets_1d({{1, 1.0}});
  // From site 0 the walk needs two steps to reach the vacancy at 2.
  const Trajectory traj =
      run_single(space, right, Configuration::from_bitstring("1100"), 2.0, RngPlan{3}, 1);
  bool saw_cap = false;
  for (const Event& e : traj.events) {
    if (e.outcome == EventOutcome::StepCap) saw_cap = true;
    CHECK(e.outcome != EventOutcome::JumpTo);  // nothing can resolve in one step
  }
  CHECK(saw_cap);
  CHECK(traj.step_capped());
  CHECK(traj.final_config.bitstring() == "1100");
}

TEST_CASE("window restriction copies occupancy by coordinate") {
  const SiteSpace big = SiteSpace::segment(11, BoundaryPolicy::OpenEscape);
  Configuration base(big.size());
  base.set(big.site_at({0}), 1);
  base.set(big.site_at({2}), 1);
  base.set(big.site_at({-4}), 1);

  const SiteSpace small = SiteSpace::segment(5, BoundaryPolicy::OpenEscape);
  const Configuration c = restrict_to(big, base, small);
  CHECK(c(small.site_at({0})));
  CHECK(c(small.site_at({2})));
  CHECK(c.count() == 2);  // the particle at -4 lies outside the window
}

TEST_CASE("window sequences restart the same plan on each radius") {
  const SiteSpace big = SiteSpace::segment(21, BoundaryPolicy::OpenEscape);
  Configuration base(big.size());
  for (int c : {-2, -1, 1, 3}) base.set(big.site_at({c}), 1);
  const Kernel kernel = Kernel::nearest_neighbour(0.6);

  const auto runs = run_window_sequence(big, base, kernel, {4, 4, 6}, 1.5, RngPlan{77});
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].radius == 4);
  CHECK(runs[0].space.size() == 9);
  CHECK(io::events_csv(runs[0].space, runs[0].trajectory) ==
        io::events_csv(runs[1].space, runs[1].trajectory));
  CHECK(runs[2].trajectory.initial.count() == 4);
  CHECK(runs[0].trajectory.initial.count() == 4);
}

TEST_CASE("vacant sites burn clock ticks without emitting events") {
  const SiteSpace space = SiteSpace::torus({5});
  const Kernel kernel = Kernel::nearest_neighbour(0.7);
  const Trajectory traj =
      run_single(space, kernel, Configuration(space.size()), 3.0, RngPlan{15});
  CHECK(traj.events.empty());
  CHECK(traj.final_config.count() == 0);
}
