// Command line front end: exact rate reports, generator analysis, stochastic
// runs, coupled runs, named experiments, and the acceptance gate. Every
// subcommand reads one JSON config, writes its outputs plus a resolved config
// and a manifest into the output directory, and removes partial outputs when
// a run fails.
//
// Exit codes: 0 success, 1 failing acceptance criteria, 2 invalid config or
// request, 3 numerical failure.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lrex/acceptance.hpp"
#include "lrex/exact.hpp"
#include "lrex/io.hpp"
#include "lrex/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lrex;

namespace {

// ---------------------------------------------------------------- config --

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
}

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ValidationError("unknown key \"" + key + "\" in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

SiteSpace parse_space(const json& j) {
  if (!j.is_object() || !j.contains("type"))
    throw ValidationError("space needs a \"type\" of \"torus\" or \"segment\"");
  const std::string type = j.at("type").get<std::string>();
  if (type == "torus") {
    require_keys(j, {"type", "dims"}, "space");
    return SiteSpace::torus(j.at("dims").get<std::vector<int>>());
  }
  if (type == "segment") {
    require_keys(j, {"type", "length", "boundary"}, "space");
    const std::string boundary = get_or<std::string>(j, "boundary", "open");
    if (boundary != "open" && boundary != "occupied")
      throw ValidationError("space boundary must be \"open\" or \"occupied\"");
    return SiteSpace::segment(j.at("length").get<int>(), boundary == "open"
                                                             ? BoundaryPolicy::OpenEscape
                                                             : BoundaryPolicy::OccupiedExterior);
  }
  throw ValidationError("unknown space type \"" + type + "\"");
}

Kernel parse_kernel(const json& j) {
  require_keys(j, {"offsets", "matrix"}, "kernel");
  return Kernel::from_json(j);
}

// A configuration is either a literal bitstring or {"density": rho}, drawn
// deterministically from the run seed.
Configuration parse_occupancy(const json& j, const SiteSpace& space, std::uint64_t seed,
                              std::uint64_t salt, const std::string& where) {
  if (j.is_string()) {
    const Configuration c = Configuration::from_bitstring(j.get<std::string>());
    if (static_cast<int>(c.size()) != space.size())
      throw ValidationError(where + " has " + std::to_string(c.size()) + " sites but the space has " +
                            std::to_string(space.size()));
    return c;
  }
  require_keys(j, {"density"}, where);
  const double rho = j.at("density").get<double>();
  if (rho < 0 || rho > 1) throw ValidationError(where + " density must lie in [0,1]");
  Stream rng(derive_key(seed, stream_tag::scratch, salt));
  return Configuration::bernoulli(space.size(), rho, rng);
}

std::uint64_t resolve_seed(const json& cfg, const std::optional<std::uint64_t>& flag,
                           std::optional<std::uint64_t> fallback = std::nullopt) {
  if (flag) return *flag;
  if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
  if (fallback) return *fallback;
  throw ValidationError("a seed is required: set \"seed\" in the config or pass --seed");
}

// --------------------------------------------------------------- outputs --

struct RunContext {
  fs::path dir;
  std::vector<fs::path> written;
  std::string started = io::timestamp_utc();

  explicit RunContext(const std::string& out_flag) {
    std::string chosen = out_flag;
    if (chosen.empty()) {
      const char* env = std::getenv("LREX_OUTPUT_DIR");
      chosen = env && *env ? env : ".";
    }
    dir = fs::path(chosen);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir.string());
  }

  void emit(const std::string& name, const std::string& text) {
    const fs::path path = dir / name;
    io::write_text(path, text);
    written.push_back(path);
  }
  void emit_json(const std::string& name, const json& j) {
    const fs::path path = dir / name;
    io::write_json(path, j);
    written.push_back(path);
  }

  void finish(const json& resolved, std::uint64_t seed) {
    emit_json("resolved_config.json", resolved);
    std::vector<std::string> names;
    for (const auto& p : written) names.push_back(p.filename().string());
    names.push_back("manifest.json");
    io::write_json(dir / "manifest.json",
                   io::manifest_json(resolved, seed, started, io::timestamp_utc(), names));
  }

  void discard() noexcept {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

template <typename Fn>
int guarded(RunContext& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (...) {
    ctx.discard();
    throw;
  }
}

// ----------------------------------------------------------------- rates --

int cmd_rates(const json& cfg, RunContext& ctx, std::optional<std::uint64_t> seed_flag) {
  require_keys(cfg, {"space", "kernel", "occupancy", "sources", "arrival_targets", "seed"},
               "rates config");
  const std::uint64_t seed = resolve_seed(cfg, seed_flag, 0);
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  kernel.validate_on(space);
  const Configuration eta = parse_occupancy(cfg.at("occupancy"), space, seed, 0, "occupancy");

  std::vector<Site> sources;
  if (cfg.contains("sources")) {
    for (int s : cfg.at("sources").get<std::vector<int>>()) {
      if (s < 0 || s >= space.size()) throw ValidationError("source site out of range");
      if (!eta(s)) throw ValidationError("source site " + std::to_string(s) + " is vacant");
      sources.push_back(s);
    }
  } else {
    sources = eta.occupied_sites();
  }

  json reports = json::array();
  for (Site s : sources) reports.push_back(io::rate_report_json(space, rate_report(space, kernel, s, eta)));

  json arrivals = json::array();
  for (int t : get_or<std::vector<int>>(cfg, "arrival_targets", {})) {
    if (t < 0 || t >= space.size()) throw ValidationError("arrival target out of range");
    arrivals.push_back({{"site", t},
                        {"coord", io::site_label(space, t)},
                        {"rate", arrival_rate(space, kernel, t, eta)}});
  }

  json out{{"space", io::space_json(space)},
           {"kernel", kernel.to_json()},
           {"occupancy", eta.bitstring()},
           {"reports", reports}};
  if (!arrivals.empty()) out["arrivals"] = arrivals;
  ctx.emit_json("rates.json", out);

  json resolved = cfg;
  resolved["seed"] = seed;
  ctx.finish(resolved, seed);
  return 0;
}

// ----------------------------------------------------------------- exact --

json classes_summary(const ExactGenerator& g, RunContext& ctx) {
  const auto classes = stationary_distributions(g);
  io::CsvBuilder csv({"class", "state", "probability"});
  json rows = json::array();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t i = 0; i < classes[c].states.size(); ++i)
      csv.row({std::to_string(c), std::to_string(classes[c].states[i]),
               io::format_double(classes[c].pi(static_cast<int>(i)))});
    rows.push_back({{"size", classes[c].states.size()}, {"residual", classes[c].residual}});
  }
  ctx.emit("classes.csv", csv.str());
  return rows;
}

int cmd_exact(const json& cfg, RunContext& ctx) {
  require_keys(cfg,
               {"space", "kernel", "mode", "shell", "shells", "stationary", "invariance",
                "ordered", "distribution"},
               "exact config");
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const std::string mode = get_or<std::string>(cfg, "mode", "single");
  if (mode != "single" && mode != "coupled")
    throw ValidationError("exact mode must be \"single\" or \"coupled\"");
  const bool coupled = mode == "coupled";
  if (coupled && cfg.contains("shell"))
    throw ValidationError("coupled mode takes \"shells\", not \"shell\"");
  if (!coupled && cfg.contains("shells"))
    throw ValidationError("single mode takes \"shell\", not \"shells\"");
  if (!coupled && cfg.contains("ordered"))
    throw ValidationError("\"ordered\" applies to coupled mode only");
  if (coupled && cfg.contains("invariance"))
    throw ValidationError("\"invariance\" applies to single mode only");

  ExactGenerator g;
  if (coupled) {
    std::optional<std::pair<int, int>> shells;
    if (cfg.contains("shells")) {
      const auto v = cfg.at("shells").get<std::vector<int>>();
      if (v.size() != 2) throw ValidationError("\"shells\" must be a pair of particle counts");
      shells = {v[0], v[1]};
    }
    g = build_coupled_generator(space, kernel, shells);
  } else {
    std::optional<int> shell;
    if (cfg.contains("shell")) shell = cfg.at("shell").get<int>();
    g = build_generator(space, kernel, shell);
  }

  {
    io::CsvBuilder csv(coupled ? std::vector<std::string>{"state", "eta", "xi", "ordered"}
                               : std::vector<std::string>{"state", "occupancy"});
    for (int i = 0; i < g.n(); ++i) {
      if (coupled) {
        const PairConfiguration pc = g.pair_of(i);
        csv.row({std::to_string(i), pc.eta.bitstring(), pc.xi.bitstring(),
                 pc.ordered() ? "1" : "0"});
      } else {
        csv.row({std::to_string(i), g.config_of(i).bitstring()});
      }
    }
    ctx.emit("states.csv", csv.str());
  }
  {
    io::CsvBuilder csv({"row", "col", "rate"});
    for (int i = 0; i < g.Q.outerSize(); ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, i); it; ++it)
        if (it.value() != 0.0)
          csv.row({std::to_string(it.row()), std::to_string(it.col()),
                   io::format_double(it.value())});
    ctx.emit("generator.csv", csv.str());
  }

  json summary{{"space", io::space_json(space)},
               {"kernel", kernel.to_json()},
               {"mode", mode},
               {"states", g.n()}};
  if (get_or<bool>(cfg, "stationary", true)) summary["classes"] = classes_summary(g, ctx);

  if (cfg.contains("invariance")) {
    const json& inv = cfg.at("invariance");
    require_keys(inv, {"density", "rmax"}, "invariance");
    const InvarianceReport rep =
        invariance_report(g, product_measure(g, inv.at("density").get<double>()),
                          get_or<int>(inv, "rmax", 3));
    json cylinders = json::array();
    for (const auto& c : rep.cylinders) {
      json sites = json::array();
      for (Site s : c.sites) sites.push_back(io::site_label(space, s));
      cylinders.push_back({{"sites", sites}, {"value", c.value}});
    }
    ctx.emit_json("invariance.json", {{"generator_residual", rep.generator_residual},
                                      {"max_cylinder", rep.max_cylinder()},
                                      {"cylinders", cylinders}});
  }

  if (coupled && get_or<bool>(cfg, "ordered", true)) {
    const OrderedAbsorptionReport rep = ordered_absorption_report(g);
    json classes = json::array();
    for (const auto& row : rep.classes)
      classes.push_back({{"size", row.size},
                         {"unordered_mass", row.unordered_mass},
                         {"opposite_adjacent_mass", row.opposite_adjacent_mass},
                         {"multi_alternation_mass", row.multi_alternation_mass},
                         {"residual", row.residual}});
    ctx.emit_json("ordered.json", {{"ordered_closed", rep.ordered_closed},
                                   {"min_hit_ordered", rep.min_hit_ordered},
                                   {"unordered_recurrent_states", rep.unordered_recurrent_states},
                                   {"classes", classes}});
  }

  if (cfg.contains("distribution")) {
    const json& dist = cfg.at("distribution");
    int start = -1;
    if (coupled) {
      require_keys(dist, {"eta", "xi", "time"}, "distribution");
      start = g.state_of(PairConfiguration(
          Configuration::from_bitstring(dist.at("eta").get<std::string>()),
          Configuration::from_bitstring(dist.at("xi").get<std::string>())));
    } else {
      require_keys(dist, {"occupancy", "time"}, "distribution");
      start = g.state_of(Configuration::from_bitstring(dist.at("occupancy").get<std::string>()));
    }
    const Eigen::VectorXd row = expm_row(g, start, dist.at("time").get<double>());
    io::CsvBuilder csv({"state", "probability"});
    for (int i = 0; i < g.n(); ++i) csv.row({std::to_string(i), io::format_double(row(i))});
    ctx.emit("distribution.csv", csv.str());
  }

  ctx.emit_json("summary.json", summary);
  ctx.finish(cfg, 0);
  return 0;
}

// -------------------------------------------------------------- simulate --

std::vector<double> snapshot_times(const json& cfg, double horizon) {
  std::set<double> times{0.0, horizon};
  for (double t : get_or<std::vector<double>>(cfg, "sample_times", {})) {
    if (t < 0 || t > horizon) throw ValidationError("sample times must lie in [0, horizon]");
    times.insert(t);
  }
  return {times.begin(), times.end()};
}

int cmd_simulate(const json& cfg, RunContext& ctx, std::optional<std::uint64_t> seed_flag) {
  require_keys(cfg, {"space", "kernel", "occupancy", "horizon", "seed", "step_cap", "sample_times"},
               "simulate config");
  const std::uint64_t seed = resolve_seed(cfg, seed_flag);
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const Configuration eta0 = parse_occupancy(cfg.at("occupancy"), space, seed, 0, "occupancy");
  const double horizon = cfg.at("horizon").get<double>();
  if (horizon < 0) throw ValidationError("horizon must be nonnegative");
  const long step_cap = get_or<long>(cfg, "step_cap", kDefaultEventStepCap);

  const Trajectory traj = run_single(space, kernel, eta0, horizon, RngPlan{seed}, step_cap);
  ctx.emit("events.csv", io::events_csv(space, traj));

  io::CsvBuilder snaps({"time", "occupancy", "particles"});
  for (double t : snapshot_times(cfg, horizon)) {
    const Configuration c = traj.at(t);
    snaps.row({io::format_double(t), c.bitstring(), std::to_string(c.count())});
  }
  ctx.emit("snapshots.csv", snaps.str());

  long jumps = 0, cancels = 0, gone = 0, capped = 0;
  for (const Event& e : traj.events) {
    jumps += e.outcome == EventOutcome::JumpTo;
    cancels += e.outcome == EventOutcome::Cancelled;
    gone += e.outcome == EventOutcome::Disappeared;
    capped += e.outcome == EventOutcome::StepCap;
  }
  ctx.emit_json("summary.json", {{"space", io::space_json(space)},
                                 {"kernel", kernel.to_json()},
                                 {"initial", eta0.bitstring()},
                                 {"final", traj.final_config.bitstring()},
                                 {"horizon", horizon},
                                 {"events", traj.events.size()},
                                 {"jumps", jumps},
                                 {"cancellations", cancels},
                                 {"disappearances", gone},
                                 {"step_capped_events", capped}});

  json resolved = cfg;
  resolved["seed"] = seed;
  ctx.finish(resolved, seed);
  return 0;
}

int cmd_couple(const json& cfg, RunContext& ctx, std::optional<std::uint64_t> seed_flag) {
  require_keys(cfg, {"space", "kernel", "eta", "xi", "horizon", "seed", "step_cap", "sample_times"},
               "couple config");
  const std::uint64_t seed = resolve_seed(cfg, seed_flag);
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const PairConfiguration pc0(parse_occupancy(cfg.at("eta"), space, seed, 1, "eta"),
                              parse_occupancy(cfg.at("xi"), space, seed, 2, "xi"));
  const double horizon = cfg.at("horizon").get<double>();
  if (horizon < 0) throw ValidationError("horizon must be nonnegative");
  const long step_cap = get_or<long>(cfg, "step_cap", kDefaultEventStepCap);

  const CoupledTrajectory traj = run_coupled(space, kernel, pc0, horizon, RngPlan{seed}, step_cap);
  ctx.emit("events.csv", io::coupled_events_csv(space, traj));

  io::CsvBuilder snaps({"time", "eta", "xi", "eta_minus_xi_sites", "xi_minus_eta_sites", "ordered"});
  for (double t : snapshot_times(cfg, horizon)) {
    const PairConfiguration pc = traj.at(t);
    long plus = 0, minus = 0;
    for (Site s = 0; s < space.size(); ++s) {
      plus += pc.d(s) == 1;
      minus += pc.d(s) == -1;
    }
    snaps.row({io::format_double(t), pc.eta.bitstring(), pc.xi.bitstring(), std::to_string(plus),
               std::to_string(minus), pc.ordered() ? "1" : "0"});
  }
  ctx.emit("snapshots.csv", snaps.str());

  const PairConfiguration last = traj.at(horizon);
  ctx.emit_json("summary.json", {{"space", io::space_json(space)},
                                 {"kernel", kernel.to_json()},
                                 {"eta_initial", pc0.eta.bitstring()},
                                 {"xi_initial", pc0.xi.bitstring()},
                                 {"eta_final", last.eta.bitstring()},
                                 {"xi_final", last.xi.bitstring()},
                                 {"horizon", horizon},
                                 {"events", traj.events.size()},
                                 {"ordered_final", last.ordered()}});

  json resolved = cfg;
  resolved["seed"] = seed;
  ctx.finish(resolved, seed);
  return 0;
}

// ------------------------------------------------------------ experiment --

// Split a replica budget into contiguous chunks and run them concurrently;
// per-replica seeding makes the merged result independent of the split.
template <typename Part>
std::vector<Part> run_chunked(long replicas, int jobs, const std::function<Part(long, long)>& fn) {
  const int n = static_cast<int>(std::max<long>(1, std::min<long>(jobs, replicas)));
  std::vector<std::future<Part>> futures;
  long first = 0;
  for (int c = 0; c < n; ++c) {
    const long count = replicas / n + (c < replicas % n ? 1 : 0);
    futures.push_back(std::async(std::launch::async, fn, first, count));
    first += count;
  }
  std::vector<Part> parts;
  for (auto& f : futures) parts.push_back(f.get());
  return parts;
}

int exp_ordered_fraction(const json& cfg, RunContext& ctx, std::uint64_t seed, int jobs) {
  require_keys(cfg, {"name", "seed", "space", "kernel", "eta", "xi", "times", "replicas",
                     "step_cap"},
               "ordered_fraction config");
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const PairConfiguration pc0(parse_occupancy(cfg.at("eta"), space, seed, 1, "eta"),
                              parse_occupancy(cfg.at("xi"), space, seed, 2, "xi"));
  const auto times = cfg.at("times").get<std::vector<double>>();
  const long replicas = cfg.at("replicas").get<long>();
  const long step_cap = get_or<long>(cfg, "step_cap", kDefaultEventStepCap);

  const auto parts = run_chunked<OrderedFractionReport>(
      replicas, jobs, [&](long first, long count) {
        return ordered_fraction(space, kernel, pc0, times, count, seed, first, step_cap);
      });

  io::CsvBuilder csv({"time", "ordered", "total", "fraction", "se"});
  json rows = json::array();
  for (std::size_t i = 0; i < times.size(); ++i) {
    long ordered = 0;
    for (const auto& p : parts) ordered += p.rows[i].ordered;
    const double frac = replicas ? double(ordered) / replicas : 0.0;
    const double se = proportion_se(frac, replicas);
    csv.row({io::format_double(times[i]), std::to_string(ordered), std::to_string(replicas),
             io::format_double(frac), io::format_double(se)});
    rows.push_back({{"time", times[i]}, {"fraction", frac}, {"se", se}});
  }
  ctx.emit("rows.csv", csv.str());
  ctx.emit_json("summary.json", {{"name", "ordered_fraction"}, {"replicas", replicas},
                                 {"rows", rows}});
  return 0;
}

int exp_sigma_moments(const json& cfg, RunContext& ctx, std::uint64_t seed) {
  require_keys(cfg, {"name", "seed", "kernel", "density", "replicas", "max_steps"},
               "sigma_moments config");
  const SigmaMomentReport rep =
      sigma_moment_estimate(parse_kernel(cfg.at("kernel")), cfg.at("density").get<double>(),
                            cfg.at("replicas").get<long>(), cfg.at("max_steps").get<int>(), seed);
  ctx.emit_json("summary.json", {{"name", "sigma_moments"},
                                 {"density", rep.rho},
                                 {"replicas", rep.replicas},
                                 {"censor_cap", rep.cap},
                                 {"mean", rep.mean},
                                 {"mean_se", rep.mean_se},
                                 {"second_moment", rep.second},
                                 {"second_moment_se", rep.second_se},
                                 {"cap_fraction", rep.cap_fraction},
                                 {"envelope", rep.envelope},
                                 {"envelope_se", rep.envelope_se},
                                 {"consistent", rep.consistent}});
  return 0;
}

int exp_hazard_tail(const json& cfg, RunContext& ctx, std::uint64_t seed) {
  require_keys(cfg, {"name", "seed", "generator", "start", "targets", "a_grid", "replicas"},
               "hazard_tail config");
  const HazardTailReport rep = hazard_tail_test(
      cfg.at("generator").get<std::vector<std::vector<double>>>(), cfg.at("start").get<int>(),
      cfg.at("targets").get<std::vector<int>>(), cfg.at("a_grid").get<std::vector<double>>(),
      cfg.at("replicas").get<long>(), seed);
  io::CsvBuilder csv({"a", "empirical", "se", "bound", "within"});
  for (const auto& row : rep.rows)
    csv.row({io::format_double(row.a), io::format_double(row.empirical), io::format_double(row.se),
             io::format_double(row.bound), row.within ? "1" : "0"});
  ctx.emit("rows.csv", csv.str());
  ctx.emit_json("summary.json", {{"name", "hazard_tail"},
                                 {"replicas", rep.replicas},
                                 {"entered_fraction", rep.entered_fraction}});
  return 0;
}

int exp_arrival_integral(const json& cfg, RunContext& ctx, std::uint64_t seed, int jobs) {
  require_keys(cfg, {"name", "seed", "space", "kernel", "site", "density", "a_grid", "replicas"},
               "arrival_integral config");
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const Site x = cfg.at("site").get<int>();
  const double rho = cfg.at("density").get<double>();
  const auto a_grid = cfg.at("a_grid").get<std::vector<double>>();
  const long replicas = cfg.at("replicas").get<long>();

  const auto parts = run_chunked<ArrivalIntegralReport>(
      replicas, jobs, [&](long first, long count) {
        return arrival_integral_tail(space, kernel, x, rho, a_grid, count, seed, first);
      });

  io::CsvBuilder csv({"a", "empirical", "se", "bound", "within"});
  double mean = 0;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    long exceed = 0;
    for (const auto& p : parts) exceed += std::lround(p.rows[i].empirical * p.replicas);
    const double frac = double(exceed) / replicas;
    const double se = proportion_se(frac, replicas);
    const double bound = compound_tail(a_grid[i], 2);
    csv.row({io::format_double(a_grid[i]), io::format_double(frac), io::format_double(se),
             io::format_double(bound), frac <= bound + 3 * se ? "1" : "0"});
  }
  for (const auto& p : parts) mean += p.mean_integral * p.replicas;
  mean /= std::max<long>(1, replicas);
  ctx.emit("rows.csv", csv.str());
  ctx.emit_json("summary.json",
                {{"name", "arrival_integral"}, {"replicas", replicas}, {"mean_integral", mean}});
  return 0;
}

int exp_range(const json& cfg, RunContext& ctx, std::uint64_t seed) {
  require_keys(cfg, {"name", "seed", "kernel", "max_range", "step_grid", "replicas"},
               "range config");
  const RangeReport rep = range_statistics(parse_kernel(cfg.at("kernel")),
                                           cfg.at("max_range").get<int>(),
                                           cfg.at("step_grid").get<std::vector<int>>(),
                                           cfg.at("replicas").get<long>(), seed);
  io::CsvBuilder csv({"range", "tau_mean", "tau_se"});
  for (int k = 2; k <= rep.max_range; ++k)
    csv.row({std::to_string(k), io::format_double(rep.tau_mean[k]),
             io::format_double(rep.tau_stderr[k])});
  ctx.emit("rows.csv", csv.str());

  io::CsvBuilder hist({"steps", "range", "count"});
  for (std::size_t g = 0; g < rep.step_grid.size(); ++g)
    for (std::size_t r = 0; r < rep.range_hist[g].size(); ++r)
      if (rep.range_hist[g][r])
        hist.row({std::to_string(rep.step_grid[g]), std::to_string(r),
                  std::to_string(rep.range_hist[g][r])});
  ctx.emit("histogram.csv", hist.str());
  ctx.emit_json("summary.json", {{"name", "range"},
                                 {"replicas", rep.replicas},
                                 {"max_range", rep.max_range}});
  return 0;
}

int exp_window_growth(const json& cfg, RunContext& ctx, std::uint64_t seed) {
  require_keys(cfg, {"name", "seed", "kernel", "base_radius", "occupancy", "radii", "horizon",
                     "boundary", "step_cap"},
               "window_growth config");
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const int base_radius = cfg.at("base_radius").get<int>();
  const auto radii = cfg.at("radii").get<std::vector<int>>();
  for (int r : radii)
    if (r > base_radius)
      throw ValidationError("window radius " + std::to_string(r) +
                            " exceeds the base radius; the base must contain every window");
  const SiteSpace big = SiteSpace::segment(2 * base_radius + 1, BoundaryPolicy::OpenEscape);
  const Configuration base = parse_occupancy(cfg.at("occupancy"), big, seed, 0, "occupancy");
  const double horizon = cfg.at("horizon").get<double>();
  const std::string boundary = get_or<std::string>(cfg, "boundary", "open");
  if (boundary != "open" && boundary != "occupied")
    throw ValidationError("boundary must be \"open\" or \"occupied\"");
  const long step_cap = get_or<long>(cfg, "step_cap", kDefaultEventStepCap);

  const auto runs = run_window_sequence(big, base, kernel, radii, horizon, RngPlan{seed},
                                        boundary == "open" ? BoundaryPolicy::OpenEscape
                                                           : BoundaryPolicy::OccupiedExterior,
                                        step_cap);
  io::CsvBuilder csv({"radius", "events", "jumps", "cancellations", "disappearances",
                      "initial_particles", "final_particles", "final_occupancy"});
  for (const WindowRun& run : runs) {
    long jumps = 0, cancels = 0, gone = 0;
    for (const Event& e : run.trajectory.events) {
      jumps += e.outcome == EventOutcome::JumpTo;
      cancels += e.outcome == EventOutcome::Cancelled;
      gone += e.outcome == EventOutcome::Disappeared;
    }
    csv.row({std::to_string(run.radius), std::to_string(run.trajectory.events.size()),
             std::to_string(jumps), std::to_string(cancels), std::to_string(gone),
             std::to_string(run.trajectory.initial.count()),
             std::to_string(run.trajectory.final_config.count()),
             run.trajectory.final_config.bitstring()});
  }
  ctx.emit("rows.csv", csv.str());
  ctx.emit_json("summary.json", {{"name", "window_growth"},
                                 {"base_occupancy", base.bitstring()},
                                 {"horizon", horizon},
                                 {"windows", radii.size()}});
  return 0;
}

int exp_displacement(const json& cfg, RunContext& ctx, std::uint64_t seed) {
  require_keys(cfg, {"name", "seed", "space", "kernel", "occupancy", "sources"},
               "displacement config");
  const SiteSpace space = parse_space(cfg.at("space"));
  const Kernel kernel = parse_kernel(cfg.at("kernel"));
  const Configuration eta = parse_occupancy(cfg.at("occupancy"), space, seed, 0, "occupancy");
  std::vector<Site> sources = get_or<std::vector<int>>(cfg, "sources", {});
  if (sources.empty()) sources = eta.occupied_sites();

  io::CsvBuilder csv({"site", "coord", "variant", "signed_sum", "absolute_sum"});
  double worst = 0;
  for (Site s : sources) {
    if (s < 0 || s >= space.size()) throw ValidationError("source site out of range");
    if (!eta(s)) throw ValidationError("source site " + std::to_string(s) + " is vacant");
    for (RateVariant variant : {RateVariant::Jump, RateVariant::Free}) {
      const DisplacementSum d = displacement_sum(space, kernel, s, eta, variant);
      csv.row({std::to_string(s), io::site_label(space, s),
               variant == RateVariant::Jump ? "jump" : "free", io::format_double(d.signed_sum),
               io::format_double(d.absolute_sum)});
      worst = std::max(worst, std::abs(d.signed_sum));
    }
  }
  ctx.emit("rows.csv", csv.str());
  ctx.emit_json("summary.json", {{"name", "displacement"},
                                 {"kernel_mean_offset", kernel.mean_offset()},
                                 {"max_abs_signed_sum", worst}});
  return 0;
}

int cmd_experiment(const json& cfg, RunContext& ctx, std::optional<std::uint64_t> seed_flag,
                   int jobs) {
  if (!cfg.contains("name")) throw ValidationError("experiment config needs a \"name\"");
  const std::string name = cfg.at("name").get<std::string>();
  const std::uint64_t seed = resolve_seed(cfg, seed_flag);

  int code = 0;
  if (name == "ordered_fraction") code = exp_ordered_fraction(cfg, ctx, seed, jobs);
  else if (name == "sigma_moments") code = exp_sigma_moments(cfg, ctx, seed);
  else if (name == "hazard_tail") code = exp_hazard_tail(cfg, ctx, seed);
  else if (name == "arrival_integral") code = exp_arrival_integral(cfg, ctx, seed, jobs);
  else if (name == "range") code = exp_range(cfg, ctx, seed);
  else if (name == "window_growth") code = exp_window_growth(cfg, ctx, seed);
  else if (name == "displacement") code = exp_displacement(cfg, ctx, seed);
  else
    throw ValidationError(
        "unknown experiment \"" + name +
        "\"; expected one of ordered_fraction, sigma_moments, hazard_tail, arrival_integral, "
        "range, window_growth, displacement");

  json resolved = cfg;
  resolved["seed"] = seed;
  ctx.finish(resolved, seed);
  return code;
}

// ------------------------------------------------------------ acceptance --

int cmd_acceptance(const json& cfg, RunContext& ctx, std::optional<std::uint64_t> seed_flag,
                   std::vector<int> only, int jobs) {
  require_keys(cfg, {"seed", "only", "jobs"}, "acceptance config");
  const std::uint64_t seed = resolve_seed(cfg, seed_flag, acceptance::kDefaultSeed);
  if (only.empty()) only = get_or<std::vector<int>>(cfg, "only", {});
  if (jobs <= 1) jobs = get_or<int>(cfg, "jobs", 1);

  const auto results = acceptance::run_all(seed, only, jobs);
  bool all_pass = true;
  json rows = json::array();
  for (const auto& r : results) {
    std::cout << acceptance::format_line(r) << "\n";
    all_pass = all_pass && r.pass;
    rows.push_back({{"id", r.id},
                    {"name", r.name},
                    {"pass", r.pass},
                    {"detail", r.detail},
                    {"seconds", r.seconds}});
  }
  std::cout << (all_pass ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL") << " (" << results.size()
            << " criteria)\n";
  ctx.emit_json("acceptance.json", {{"seed", seed}, {"all_pass", all_pass}, {"results", rows}});

  json resolved = cfg;
  resolved["seed"] = seed;
  if (!only.empty()) resolved["only"] = only;
  ctx.finish(resolved, seed);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact and stochastic laboratory for long-range exclusion dynamics"};
  app.require_subcommand(1);

  std::string config_path, out_flag;
  std::optional<std::uint64_t> seed_flag;
  int jobs = 1;
  std::vector<int> only;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    sub->add_option("--config", config_path, "JSON config file")->required(config_required);
    sub->add_option("--out", out_flag,
                    "output directory (default: $LREX_OUTPUT_DIR, else the working directory)");
    sub->add_option("--seed", seed_flag, "seed override");
    return sub;
  };

  auto* rates = add_common(app.add_subcommand("rates", "exact jump, free and vanish rates"), true);
  auto* exact = add_common(app.add_subcommand("exact", "finite state space generator analysis"), true);
  auto* simulate = add_common(app.add_subcommand("simulate", "stochastic run of one copy"), true);
  auto* couple = add_common(app.add_subcommand("couple", "stochastic run of a coupled pair"), true);
  auto* experiment = add_common(app.add_subcommand("experiment", "named experiment"), true);
  experiment->add_option("--jobs", jobs, "worker threads for replica experiments");
  auto* acceptance_cmd =
      add_common(app.add_subcommand("acceptance", "run the acceptance criteria"), false);
  acceptance_cmd->add_option("--jobs", jobs, "criteria run concurrently");
  acceptance_cmd->add_option("--only", only, "criterion ids to run (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const json cfg = config_path.empty() ? json::object() : load_config(config_path);
    RunContext ctx(out_flag);
    return guarded(ctx, [&]() -> int {
      if (rates->parsed()) return cmd_rates(cfg, ctx, seed_flag);
      if (exact->parsed()) return cmd_exact(cfg, ctx);
      if (simulate->parsed()) return cmd_simulate(cfg, ctx, seed_flag);
      if (couple->parsed()) return cmd_couple(cfg, ctx, seed_flag);
      if (experiment->parsed()) return cmd_experiment(cfg, ctx, seed_flag, jobs);
      return cmd_acceptance(cfg, ctx, seed_flag, only, jobs);
    });
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NotComputableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 3;
  }
}
