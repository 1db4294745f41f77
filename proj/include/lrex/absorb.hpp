#pragma once

#include <algorithm>
#include <deque>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "lrex/errors.hpp"
#include "lrex/kernel.hpp"
#include "lrex/site_space.hpp"

namespace lrex {

constexpr int kDenseSolveLimit = 2000;
constexpr double kSolveResidualTolerance = 1e-12;

// Outcome of an absorbing-chain solve: the walk starts at `start`, always
// takes its first step, then moves through transient sites until it lands on
// a non-transient site. Mass that leaves an open-escape window is reported
// as `escape`; mass that can never be absorbed (closed transient classes, or
// never-returning exterior excursions) is reported as `vanish`.
struct AbsorbResult {
  std::unordered_map<Site, double> absorbed;
  double escape = 0.0;
  double vanish = 0.0;
  bool boundary_touched = false;  // some reachable row had off-window mass
  int transient_count = 0;

  double at(Site s) const {
    auto it = absorbed.find(s);
    return it == absorbed.end() ? 0.0 : it->second;
  }

  double absorbed_total() const {
    double t = 0;
    for (const auto& [s, p] : absorbed) t += p;
    return t;
  }
};

namespace detail {

// Row with occupied-exterior boundary excursions folded in: the exit mass
// from an edge site either returns to that edge (nearest-neighbour gambler's
// ruin) or never comes back and joins `vanish`.
struct SolveRow {
  std::vector<std::pair<Site, double>> targets;
  double escape = 0.0;
  double vanish = 0.0;
  bool touched_boundary = false;
};

inline SolveRow make_solve_row(const SiteSpace& space, const Kernel& kernel, Site s) {
  SolveRow out;
  KernelRow r = kernel.row(space, s);
  out.targets = std::move(r.targets);
  if (r.exit_mass() == 0.0) return out;
  out.touched_boundary = true;
  if (space.boundary() == BoundaryPolicy::OpenEscape) {
    out.escape = r.exit_mass();
    return out;
  }
  // Occupied exterior: only the nearest-neighbour walk has a computable
  // return law (first re-entry is at the departed edge site).
  const auto nn = kernel.nn_right();
  if (!nn)
    throw NotComputableError(
        "walk reaches an occupied-exterior boundary with a non-nearest-neighbour "
        "kernel; no exact return law is available");
  const double p = *nn, q = 1 - p;
  if (r.exit_right > 0) {
    const double ret = p > 0 ? std::min(1.0, q / p) : 0.0;
    if (ret > 0) out.targets.push_back({s, r.exit_right * ret});
    out.vanish += r.exit_right * (1 - ret);
  }
  if (r.exit_left > 0) {
    const double ret = q > 0 ? std::min(1.0, p / q) : 0.0;
    if (ret > 0) out.targets.push_back({s, r.exit_left * ret});
    out.vanish += r.exit_left * (1 - ret);
  }
  return out;
}

}  // namespace detail

// transient[s] != 0 marks s as pass-through; every other site absorbs.
inline AbsorbResult absorb_solve(const SiteSpace& space, const Kernel& kernel, Site start,
                                 const std::vector<char>& transient) {
  kernel.validate_on(space);
  if (start < 0 || start >= space.size()) throw ValidationError("walk start is off the space");

  AbsorbResult res;
  std::unordered_map<Site, detail::SolveRow> rows;
  auto row_of = [&](Site s) -> const detail::SolveRow& {
    auto it = rows.find(s);
    if (it == rows.end())
      it = rows.emplace(s, detail::make_solve_row(space, kernel, s)).first;
    return it->second;
  };

  // Reachable transient set (breadth-first through transient sites only).
  std::vector<Site> order;
  std::vector<char> seen(space.size(), 0);
  std::deque<Site> frontier;
  auto visit_targets = [&](const detail::SolveRow& r) {
    for (const auto& [t, p] : r.targets) {
      if (p > 0 && transient[t] && !seen[t]) {
        seen[t] = 1;
        order.push_back(t);
        frontier.push_back(t);
      }
    }
  };
  const detail::SolveRow& start_row = row_of(start);
  res.boundary_touched = start_row.touched_boundary;
  visit_targets(start_row);
  while (!frontier.empty()) {
    const Site s = frontier.front();
    frontier.pop_front();
    const detail::SolveRow& r = row_of(s);
    res.boundary_touched = res.boundary_touched || r.touched_boundary;
    visit_targets(r);
  }
  res.transient_count = static_cast<int>(order.size());

  // States that can leak mass out of the transient set. Anything that cannot
  // reach a leak is a closed transient class; mass entering it vanishes.
  const int n = static_cast<int>(order.size());
  std::vector<int> index(space.size(), -1);
  for (int i = 0; i < n; ++i) index[order[i]] = i;
  std::vector<std::vector<int>> rev(n);
  std::vector<char> leaks(n, 0);
  for (int i = 0; i < n; ++i) {
    const detail::SolveRow& r = row_of(order[i]);
    if (r.escape > 0 || r.vanish > 0) leaks[i] = 1;
    for (const auto& [t, p] : r.targets) {
      if (p <= 0) continue;
      if (transient[t]) rev[index[t]].push_back(i);
      else leaks[i] = 1;
    }
  }
  std::deque<int> lq;
  std::vector<char> can_leak(n, 0);
  for (int i = 0; i < n; ++i)
    if (leaks[i]) { can_leak[i] = 1; lq.push_back(i); }
  while (!lq.empty()) {
    const int i = lq.front();
    lq.pop_front();
    for (int j : rev[i])
      if (!can_leak[j]) { can_leak[j] = 1; lq.push_back(j); }
  }

  std::vector<int> solve_index(n, -1);
  std::vector<Site> solve_sites;
  for (int i = 0; i < n; ++i)
    if (can_leak[i]) {
      solve_index[i] = static_cast<int>(solve_sites.size());
      solve_sites.push_back(order[i]);
    }
  const int m = static_cast<int>(solve_sites.size());

  // Column layout: one per reached absorbing site, then escape, then vanish.
  std::vector<Site> absorbers;
  std::unordered_map<Site, int> acol;
  auto absorber_col = [&](Site s) {
    auto it = acol.find(s);
    if (it != acol.end()) return it->second;
    const int c = static_cast<int>(absorbers.size());
    acol.emplace(s, c);
    absorbers.push_back(s);
    return c;
  };
  auto scan_for_absorbers = [&](const detail::SolveRow& r) {
    for (const auto& [t, p] : r.targets)
      if (p > 0 && !transient[t]) absorber_col(t);
  };
  scan_for_absorbers(start_row);
  for (int i = 0; i < m; ++i) scan_for_absorbers(row_of(solve_sites[i]));

  const int na = static_cast<int>(absorbers.size());
  const int ncols = na + 2;
  Eigen::MatrixXd H;  // m x ncols absorption probabilities from each state
  if (m > 0) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, ncols);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m; ++i) {
      const detail::SolveRow& r = row_of(solve_sites[i]);
      B(i, na) += r.escape;
      B(i, na + 1) += r.vanish;
      for (const auto& [t, p] : r.targets) {
        if (p <= 0) continue;
        if (!transient[t]) {
          B(i, acol.at(t)) += p;
        } else if (const int j = solve_index[index[t]]; j >= 0) {
          trips.emplace_back(i, j, p);
        } else {
          B(i, na + 1) += p;  // steps into a closed transient class
        }
      }
    }
    if (m <= kDenseSolveLimit) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);
      for (const auto& t : trips) M(t.row(), t.col()) -= t.value();
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
      H = lu.solve(B);
      const double resid = (M * H - B).cwiseAbs().maxCoeff();
      if (!(resid < kSolveResidualTolerance))
        throw NumericalFailure("absorbing solve residual " + std::to_string(resid) +
                               " exceeds 1e-12");
    } else {
      Eigen::SparseMatrix<double> M(m, m);
      std::vector<Eigen::Triplet<double>> mt = trips;
      for (auto& t : mt) t = {t.row(), t.col(), -t.value()};
      for (int i = 0; i < m; ++i) mt.emplace_back(i, i, 1.0);
      M.setFromTriplets(mt.begin(), mt.end());
      Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
      solver.setTolerance(1e-14);
      solver.setMaxIterations(20000);
      solver.compute(M);
      H.resize(m, ncols);
      for (int c = 0; c < ncols; ++c) {
        H.col(c) = solver.solve(B.col(c));
        if (solver.info() != Eigen::Success)
          throw NumericalFailure("iterative absorbing solve failed to converge");
      }
      const double resid = (M * H - B).cwiseAbs().maxCoeff();
      if (!(resid < 1e-10))
        throw NumericalFailure("iterative absorbing solve residual too large");
    }
  }

  // First step from `start` is always taken; average the state values.
  auto add_absorbed = [&](Site s, double p) {
    if (p <= 0) return;
    auto [it, inserted] = res.absorbed.emplace(s, p);
    if (!inserted) it->second += p;
  };
  res.escape += start_row.escape;
  res.vanish += start_row.vanish;
  for (const auto& [t, p] : start_row.targets) {
    if (p <= 0) continue;
    if (!transient[t]) {
      add_absorbed(t, p);
    } else if (const int j = solve_index[index[t]]; j >= 0) {
      for (int c = 0; c < na; ++c) add_absorbed(absorbers[c], p * H(j, c));
      res.escape += p * H(j, na);
      res.vanish += p * H(j, na + 1);
    } else {
      res.vanish += p;
    }
  }
  for (auto& [s, p] : res.absorbed) p = std::clamp(p, 0.0, 1.0);
  res.escape = std::clamp(res.escape, 0.0, 1.0);
  res.vanish = std::clamp(res.vanish, 0.0, 1.0);
  return res;
}

}  // namespace lrex
