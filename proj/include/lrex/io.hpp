#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrex/coupled.hpp"
#include "lrex/rates.hpp"
#include "lrex/simulate.hpp"

namespace lrex::io {

// Shortest decimal that round-trips the double; stable run to run.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// CSV assembled in memory so callers can compare or write atomically.
class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header) { line(header); }

  void row(const std::vector<std::string>& cells) { line(cells); }

  const std::string& str() const { return text_; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }
  std::string text_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::string site_label(const SiteSpace& space, Site s) {
  const auto c = space.coords(s);
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ':';
    out += std::to_string(c[i]);
  }
  return out;
}

inline nlohmann::json stop_report_json(const SiteSpace& space, const StopReport& rep) {
  nlohmann::json stops = nlohmann::json::array();
  std::vector<Site> sites;
  for (const auto& [s, p] : rep.stop) sites.push_back(s);
  std::sort(sites.begin(), sites.end());
  for (Site s : sites)
    stops.push_back({{"site", s},
                     {"coord", site_label(space, s)},
                     {"probability", rep.stop.at(s)}});
  return nlohmann::json{{"source", rep.source},
                        {"stops", stops},
                        {"cancel", rep.cancel},
                        {"vanish", rep.vanish},
                        {"escape", rep.escape},
                        {"boundary_touched", rep.boundary_touched}};
}

inline nlohmann::json rate_report_json(const SiteSpace& space, const RateReport& rep) {
  return nlohmann::json{{"source", rep.source},
                        {"coord", site_label(space, rep.source)},
                        {"jump", stop_report_json(space, rep.jump)},
                        {"free", stop_report_json(space, rep.free)}};
}

inline nlohmann::json coupled_rates_json(const SiteSpace& space, const CoupledRates& cr) {
  auto site_map = [&](const std::map<Site, double>& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [y, r] : m)
      arr.push_back({{"site", y}, {"coord", site_label(space, y)}, {"rate", r}});
    return arr;
  };
  auto pair_map = [&](const std::map<std::pair<Site, Site>, double>& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [yz, r] : m)
      arr.push_back({{"first_stop", yz.first}, {"second_stop", yz.second}, {"rate", r}});
    return arr;
  };
  nlohmann::json families;
  families["family_2"] = site_map(cr.both_jump);
  families["family_3"] = pair_map(cr.eta_jump_xi_continue);
  families["family_4"] = pair_map(cr.xi_jump_eta_continue);
  families["family_5"] = site_map(cr.eta_jump_xi_cancel);
  families["family_6"] = site_map(cr.xi_jump_eta_cancel);
  families["family_7"] = site_map(cr.eta_alone);
  families["family_8"] = site_map(cr.xi_alone);
  families["family_9"] = site_map(cr.eta_jump_xi_vanish);
  families["family_10"] = site_map(cr.xi_jump_eta_vanish);
  families["family_11"] = cr.eta_vanish;
  families["family_12"] = cr.xi_vanish;
  families["family_13"] = cr.both_vanish;
  return nlohmann::json{{"source", cr.source},
                        {"coord", site_label(space, cr.source)},
                        {"eta_at_source", cr.eta_at_source},
                        {"xi_at_source", cr.xi_at_source},
                        {"families", families},
                        {"cancel", cr.cancel},
                        {"escape",
                         {{"both", cr.both_escape},
                          {"eta_alone", cr.eta_escape},
                          {"xi_alone", cr.xi_escape},
                          {"eta_jump", site_map(cr.eta_jump_xi_escape)},
                          {"xi_jump", site_map(cr.xi_jump_eta_escape)}}},
                        {"total", cr.total()},
                        {"boundary_touched", cr.boundary_touched}};
}

inline nlohmann::json space_json(const SiteSpace& space) {
  if (space.is_torus()) return nlohmann::json{{"type", "torus"}, {"dims", space.dims()}};
  return nlohmann::json{
      {"type", "segment"},
      {"length", space.size()},
      {"boundary", space.boundary() == BoundaryPolicy::OpenEscape ? "open" : "occupied"}};
}

inline std::string events_csv(const SiteSpace& space, const Trajectory& traj) {
  CsvBuilder csv({"time", "site", "coord", "ring", "outcome", "target", "steps"});
  for (const Event& e : traj.events)
    csv.row({format_double(e.time), std::to_string(e.site), site_label(space, e.site),
             std::to_string(e.ring), to_string(e.outcome), std::to_string(e.target),
             std::to_string(e.steps)});
  return csv.str();
}

inline std::string coupled_events_csv(const SiteSpace& space, const CoupledTrajectory& traj) {
  CsvBuilder csv({"time", "site", "coord", "ring", "eta_outcome", "eta_target", "xi_outcome",
                  "xi_target"});
  for (const CoupledEvent& e : traj.events)
    csv.row({format_double(e.time), std::to_string(e.site), site_label(space, e.site),
             std::to_string(e.ring), to_string(e.eta.outcome), std::to_string(e.eta.target),
             to_string(e.xi.outcome), std::to_string(e.xi.target)});
  return csv.str();
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128] = {0};
  std::string out;
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

// Build manifest: the resolved configuration, the seed actually used, the
// source revision, and wall-clock bounds of the run. The timestamps and
// revision are the only fields expected to differ between reruns.
inline nlohmann::json manifest_json(const nlohmann::json& config, std::uint64_t seed,
                                    const std::string& started, const std::string& finished,
                                    const std::vector<std::string>& outputs) {
  return nlohmann::json{{"config", config},
                        {"seed", seed},
                        {"revision", git_describe()},
                        {"started", started},
                        {"finished", finished},
                        {"outputs", outputs}};
}

}  // namespace lrex::io
