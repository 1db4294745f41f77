#pragma once

#include <cstdint>
#include <queue>
#include <tuple>
#include <vector>

#include "lrex/configuration.hpp"
#include "lrex/errors.hpp"
#include "lrex/kernel.hpp"
#include "lrex/rng.hpp"
#include "lrex/site_space.hpp"

namespace lrex {

// Deterministic randomness layout for a simulation run.
//
// Every site carries a rate-1 clock whose ticks are numbered by a ring
// index, and every (site, ring) pair owns an independent walk. Both are
// derived from the master seed through the site's canonical coordinate key,
// so the same seed reproduces bit-identical clocks and walks regardless of
// the configuration, of which copy of a coupling consumes them, and of the
// window a site is embedded in.
struct RngPlan {
  std::uint64_t master = 0;

  static std::uint64_t zigzag(long v) {
    return v >= 0 ? 2ull * static_cast<std::uint64_t>(v)
                  : 2ull * static_cast<std::uint64_t>(-(v + 1)) + 1ull;
  }

  // Canonical key of a site: its centered coordinates, zigzag-encoded and
  // packed 16 bits per axis. Stable across nested windows.
  static std::uint64_t site_key(const SiteSpace& space, Site s) {
    const std::vector<int> c = space.coords(s);
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const std::uint64_t z = zigzag(c[i]);
      if (z >= (1ull << 16)) throw ValidationError("site coordinate too large for rng keying");
      k |= z << (16 * i);
    }
    return k;
  }

  Stream clock_stream(const SiteSpace& space, Site s) const {
    return Stream(derive_key(master, stream_tag::clock_ticks, site_key(space, s)));
  }

  std::uint64_t chain_key(const SiteSpace& space, Site s, std::uint64_t ring) const {
    return derive_key(master, stream_tag::chain_steps, site_key(space, s), ring);
  }

  RngPlan replica(std::uint64_t index) const {
    return RngPlan{derive_key(master, stream_tag::replica, index)};
  }
};

// One walk, generated lazily from its own stream and shared by both copies
// of a coupling. Entry 0 is the start site; entry i the position after i
// steps. A negative entry means the walk has left the system for good
// (open-edge escape); from then on every entry is negative.
//
// On occupied-exterior windows an excursion past the edge is collapsed on
// the spot: for a nearest-neighbour kernel it returns to the edge site with
// the exact excursion-return probability, otherwise it is gone. Other
// kernels cannot run on occupied-exterior windows.
class SharedWalk {
 public:
  SharedWalk(const SiteSpace& space, const Kernel& kernel, Stream stream, Site start)
      : space_(space), kernel_(kernel), stream_(stream) {
    path_.push_back(start);
    if (space_.is_segment() && kernel_.is_offsets()) coord_ = space_.coord1(start);
  }

  Site site_at(std::size_t i) {
    while (path_.size() <= i) extend();
    return path_[i];
  }

 private:
  void extend() {
    const Site cur = path_.back();
    if (cur < 0) {
      path_.push_back(-1);
      return;
    }
    if (!kernel_.is_offsets()) {
      path_.push_back(kernel_.sample_step(space_, cur, stream_));
      return;
    }
    if (space_.is_torus()) {
      path_.push_back(space_.step(cur, kernel_.sample_offset(stream_)));
      return;
    }
    // 1-d window: walk in coordinate space so edge crossings are explicit.
    const long next = coord_ + kernel_.sample_offset(stream_)[0];
    const Site s = next >= min_coord() && next <= max_coord()
                       ? space_.site_at({static_cast<int>(next)})
                       : Site(-1);
    if (s >= 0) {
      coord_ = next;
      path_.push_back(s);
      return;
    }
    if (space_.boundary() == BoundaryPolicy::OpenEscape) {
      path_.push_back(-1);
      return;
    }
    const auto p = kernel_.nn_right();
    if (!p)
      throw NotComputableError(
          "occupied-exterior walks past the edge need a nearest-neighbour kernel");
    const bool right = next > max_coord();
    const double ret = right ? std::min(1.0, (1.0 - *p) / *p) : std::min(1.0, *p / (1.0 - *p));
    if (stream_.next_double() < ret) {
      coord_ = right ? max_coord() : min_coord();
      path_.push_back(space_.site_at({static_cast<int>(coord_)}));
    } else {
      path_.push_back(-1);
    }
  }

  long min_coord() const { return space_.coord1(0); }
  long max_coord() const { return space_.coord1(space_.size() - 1); }

  const SiteSpace& space_;
  const Kernel& kernel_;
  Stream stream_;
  long coord_ = 0;
  std::vector<Site> path_;
};

enum class EventOutcome { None, JumpTo, Cancelled, Disappeared, StepCap };

inline const char* to_string(EventOutcome o) {
  switch (o) {
    case EventOutcome::None: return "none";
    case EventOutcome::JumpTo: return "jump";
    case EventOutcome::Cancelled: return "cancel";
    case EventOutcome::Disappeared: return "disappear";
    case EventOutcome::StepCap: return "step_cap";
  }
  return "?";
}

struct Resolution {
  EventOutcome outcome = EventOutcome::None;
  Site target = -1;
  long steps = 0;
};

// Resolve one clock tick at x for one copy: scan the shared walk for the
// first return to x (cancel) or vacancy of `config` (jump); a walk that left
// the system disappears the particle. A step-capped resolution changes
// nothing and is recorded as such.
inline Resolution resolve_walk(const Configuration& config, Site x, SharedWalk& walk,
                               long step_cap) {
  for (long i = 1; i <= step_cap; ++i) {
    const Site s = walk.site_at(static_cast<std::size_t>(i));
    if (s < 0) return {EventOutcome::Disappeared, -1, i};
    if (s == x) return {EventOutcome::Cancelled, x, i};
    if (!config(s)) return {EventOutcome::JumpTo, s, i};
  }
  return {EventOutcome::StepCap, -1, step_cap};
}

inline void apply_resolution(Configuration& config, Site x, const Resolution& r) {
  switch (r.outcome) {
    case EventOutcome::JumpTo:
      config.set(x, 0);
      config.set(r.target, 1);
      break;
    case EventOutcome::Disappeared:
      config.set(x, 0);
      break;
    default:
      break;
  }
}

struct Event {
  double time = 0;
  Site site = -1;
  std::uint64_t ring = 0;
  EventOutcome outcome = EventOutcome::None;
  Site target = -1;
  long steps = 0;
};

struct Trajectory {
  Configuration initial{0};
  double horizon = 0;
  std::vector<Event> events;
  Configuration final_config{0};

  // State just after every event with time <= t.
  Configuration at(double t) const {
    Configuration c = initial;
    for (const Event& e : events) {
      if (e.time > t) break;
      apply_resolution(c, e.site, Resolution{e.outcome, e.target, e.steps});
    }
    return c;
  }

  long step_capped() const {
    long n = 0;
    for (const Event& e : events) n += e.outcome == EventOutcome::StepCap;
    return n;
  }
};

struct CoupledEvent {
  double time = 0;
  Site site = -1;
  std::uint64_t ring = 0;
  Resolution eta;
  Resolution xi;
};

struct CoupledTrajectory {
  PairConfiguration initial{Configuration{0}, Configuration{0}};
  double horizon = 0;
  std::vector<CoupledEvent> events;
  PairConfiguration final_pair{Configuration{0}, Configuration{0}};

  PairConfiguration at(double t) const {
    PairConfiguration pc = initial;
    for (const CoupledEvent& e : events) {
      if (e.time > t) break;
      apply_resolution(pc.eta, e.site, e.eta);
      apply_resolution(pc.xi, e.site, e.xi);
    }
    return pc;
  }
};

inline constexpr long kDefaultEventStepCap = 1000000;

// Drive every site's rate-1 clock up to the horizon, calling
// fire(time, site, ring) for each tick in time order. Rings advance at every
// tick whether or not the tick moves a particle.
template <class Fire>
inline void run_clocks(const SiteSpace& space, const RngPlan& plan, double horizon, Fire&& fire) {
  const int n = space.size();
  std::vector<Stream> streams;
  streams.reserve(n);
  std::vector<std::uint64_t> ring(n, 0);
  using Entry = std::pair<double, Site>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  for (Site s = 0; s < n; ++s) {
    streams.push_back(plan.clock_stream(space, s));
    queue.emplace(streams.back().next_exp(), s);
  }
  double last = -1.0;
  while (!queue.empty()) {
    const auto [t, s] = queue.top();
    if (t > horizon) break;
    queue.pop();
    if (t == last)
      throw NumericalFailure("two clock ticks share a timestamp; reseed the run");
    last = t;
    fire(t, s, ring[s]++);
    queue.emplace(t + streams[s].next_exp(), s);
  }
}

inline Trajectory run_single(const SiteSpace& space, const Kernel& kernel,
                             const Configuration& eta0, double horizon, const RngPlan& plan,
                             long step_cap = kDefaultEventStepCap) {
  if (static_cast<int>(eta0.size()) != space.size())
    throw ValidationError("configuration size does not match the site space");
  kernel.validate_on(space);
  Trajectory traj;
  traj.initial = eta0;
  traj.horizon = horizon;
  Configuration config = eta0;
  run_clocks(space, plan, horizon, [&](double t, Site x, std::uint64_t ring) {
    if (!config(x)) return;
    SharedWalk walk(space, kernel, Stream(plan.chain_key(space, x, ring)), x);
    const Resolution r = resolve_walk(config, x, walk, step_cap);
    apply_resolution(config, x, r);
    traj.events.push_back(Event{t, x, ring, r.outcome, r.target, r.steps});
  });
  traj.final_config = config;
  return traj;
}

// Coupled run: both copies share every clock tick and every walk. Each copy
// resolves the walk against its own configuration as they stood before the
// tick, then both updates land at once.
inline CoupledTrajectory run_coupled(const SiteSpace& space, const Kernel& kernel,
                                     const PairConfiguration& pc0, double horizon,
                                     const RngPlan& plan,
                                     long step_cap = kDefaultEventStepCap) {
  if (static_cast<int>(pc0.size()) != space.size())
    throw ValidationError("pair configuration size does not match the site space");
  kernel.validate_on(space);
  CoupledTrajectory traj;
  traj.initial = pc0;
  traj.horizon = horizon;
  PairConfiguration pc = pc0;
  run_clocks(space, plan, horizon, [&](double t, Site x, std::uint64_t ring) {
    if (!pc.eta(x) && !pc.xi(x)) return;
    SharedWalk walk(space, kernel, Stream(plan.chain_key(space, x, ring)), x);
    Resolution re, rx;
    if (pc.eta(x)) re = resolve_walk(pc.eta, x, walk, step_cap);
    if (pc.xi(x)) rx = resolve_walk(pc.xi, x, walk, step_cap);
    apply_resolution(pc.eta, x, re);
    apply_resolution(pc.xi, x, rx);
    traj.events.push_back(CoupledEvent{t, x, ring, re, rx});
  });
  traj.final_pair = pc;
  return traj;
}

// Restrict a configuration given on `big` to the window `small`, matching
// sites by coordinate; sites absent from the window are dropped.
inline Configuration restrict_to(const SiteSpace& big, const Configuration& base,
                                 const SiteSpace& small) {
  Configuration c(small.size());
  for (Site s = 0; s < small.size(); ++s) {
    const Site b = big.site_at(small.coords(s));
    if (b >= 0 && base(b)) c.set(s, 1);
  }
  return c;
}

struct WindowRun {
  int radius = 0;
  SiteSpace space;
  Trajectory trajectory;
};

// Run the same plan on a family of nested 1-d windows around the origin,
// each started from the restriction of one base configuration. Canonical
// coordinate keying gives every physical site the same clocks and walks in
// every window.
inline std::vector<WindowRun> run_window_sequence(const SiteSpace& big, const Configuration& base,
                                                  const Kernel& kernel,
                                                  const std::vector<int>& radii, double horizon,
                                                  const RngPlan& plan,
                                                  BoundaryPolicy policy = BoundaryPolicy::OpenEscape,
                                                  long step_cap = kDefaultEventStepCap) {
  std::vector<WindowRun> runs;
  runs.reserve(radii.size());
  for (int r : radii) {
    if (r < 1) throw ValidationError("window radius must be at least 1");
    SiteSpace space = SiteSpace::segment(2 * r + 1, policy);
    Configuration init = restrict_to(big, base, space);
    Trajectory traj = run_single(space, kernel, init, horizon, plan, step_cap);
    runs.push_back(WindowRun{r, std::move(space), std::move(traj)});
  }
  return runs;
}

}  // namespace lrex
