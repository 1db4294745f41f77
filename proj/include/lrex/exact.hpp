#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrex/coupled.hpp"
#include "lrex/rates.hpp"

namespace lrex {

// Hard cap on enumerated states, single or coupled.
inline constexpr int kMaxExactStates = 16384;
// Largest state count handled by dense linear algebra; larger problems use
// iterative methods.
inline constexpr int kDenseStateLimit = 4096;

namespace detail {

// All n-site masks with k bits set, in increasing mask order (Gosper's hack).
inline std::vector<std::uint32_t> masks_with_popcount(int n, int k) {
  if (k < 0 || k > n) throw ValidationError("shell size out of range");
  std::vector<std::uint32_t> out;
  if (k == 0) {
    out.push_back(0);
    return out;
  }
  const std::uint32_t limit = 1u << n;
  std::uint32_t v = (1u << k) - 1;
  while (v < limit) {
    out.push_back(v);
    const std::uint32_t t = v | (v - 1);
    if (t == 0xffffffffu) break;
    v = (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
  }
  return out;
}

inline std::vector<std::uint32_t> all_masks(int n) {
  if (n > 14) throw ValidationError("full state enumeration supports at most 14 sites");
  std::vector<std::uint32_t> out(std::size_t(1) << n);
  for (std::uint32_t m = 0; m < out.size(); ++m) out[m] = m;
  return out;
}

inline std::string mask_bitstring(int n, std::uint32_t m) {
  return Configuration::from_mask(n, m).bitstring();
}

}  // namespace detail

// Exact generator of the process on an enumerated state space. States are
// bit masks (pairs of masks when coupled), ordered lexicographically by
// their occupancy strings. Open-edge escape counts as disappearance, as in
// the simulation, so every row of Q sums to zero.
struct ExactGenerator {
  SiteSpace space{SiteSpace::torus({2})};
  Kernel kernel{Kernel::nearest_neighbour(0.5)};
  bool coupled = false;
  std::vector<std::uint64_t> keys;
  std::unordered_map<std::uint64_t, int> index;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q;

  int n() const { return static_cast<int>(keys.size()); }

  Configuration config_of(int i) const {
    return Configuration::from_mask(space.size(), static_cast<std::uint32_t>(keys[i]));
  }
  PairConfiguration pair_of(int i) const {
    return PairConfiguration(
        Configuration::from_mask(space.size(), static_cast<std::uint32_t>(keys[i] >> 32)),
        Configuration::from_mask(space.size(), static_cast<std::uint32_t>(keys[i] & 0xffffffffu)));
  }
  int state_of(const Configuration& c) const {
    auto it = index.find(c.to_mask());
    if (it == index.end()) throw ValidationError("configuration not in the enumerated space");
    return it->second;
  }
  int state_of(const PairConfiguration& pc) const {
    auto it = index.find((static_cast<std::uint64_t>(pc.eta.to_mask()) << 32) | pc.xi.to_mask());
    if (it == index.end()) throw ValidationError("pair not in the enumerated space");
    return it->second;
  }
};

// Enumerate single configurations, optionally restricted to one particle
// count, and assemble the exact generator.
inline ExactGenerator build_generator(const SiteSpace& space, const Kernel& kernel,
                                      std::optional<int> shell = std::nullopt) {
  kernel.validate_on(space);
  if (space.size() > 28) throw ValidationError("site space too large for exact enumeration");
  ExactGenerator g;
  g.space = space;
  g.kernel = kernel;
  g.coupled = false;

  std::vector<std::uint32_t> masks = shell ? detail::masks_with_popcount(space.size(), *shell)
                                           : detail::all_masks(space.size());
  if (static_cast<int>(masks.size()) > kMaxExactStates)
    throw ValidationError("state space exceeds " + std::to_string(kMaxExactStates) + " states");
  std::sort(masks.begin(), masks.end(), [&](std::uint32_t a, std::uint32_t b) {
    return detail::mask_bitstring(space.size(), a) < detail::mask_bitstring(space.size(), b);
  });
  g.keys.assign(masks.begin(), masks.end());
  for (int i = 0; i < g.n(); ++i) g.index[g.keys[i]] = i;

  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < g.n(); ++i) {
    const Configuration eta = g.config_of(i);
    for_each_single_transition(space, kernel, eta,
                               [&](const Configuration& next, double rate, Site, Site) {
                                 if (rate <= 0) return;
                                 auto it = g.index.find(std::uint64_t(next.to_mask()));
                                 if (it == g.index.end())
                                   throw ValidationError(
                                       "shell restriction needs particle-conserving dynamics, "
                                       "but a disappearance transition has positive rate");
                                 trips.emplace_back(i, it->second, rate);
                                 trips.emplace_back(i, i, -rate);
                               });
  }
  g.Q.resize(g.n(), g.n());
  g.Q.setFromTriplets(trips.begin(), trips.end());
  return g;
}

// Enumerate pairs of configurations, optionally restricted to one particle
// count per copy, and assemble the coupled generator.
inline ExactGenerator build_coupled_generator(
    const SiteSpace& space, const Kernel& kernel,
    std::optional<std::pair<int, int>> shells = std::nullopt) {
  kernel.validate_on(space);
  if (space.size() > 28) throw ValidationError("site space too large for exact enumeration");
  ExactGenerator g;
  g.space = space;
  g.kernel = kernel;
  g.coupled = true;

  std::vector<std::uint32_t> eta_masks, xi_masks;
  if (shells) {
    eta_masks = detail::masks_with_popcount(space.size(), shells->first);
    xi_masks = detail::masks_with_popcount(space.size(), shells->second);
  } else {
    if (space.size() > 7)
      throw ValidationError("full pair enumeration supports at most 7 sites; restrict shells");
    eta_masks = detail::all_masks(space.size());
    xi_masks = eta_masks;
  }
  if (eta_masks.size() * xi_masks.size() > std::size_t(kMaxExactStates))
    throw ValidationError("pair state space exceeds " + std::to_string(kMaxExactStates) +
                          " states");

  std::vector<std::pair<std::string, std::uint64_t>> decorated;
  decorated.reserve(eta_masks.size() * xi_masks.size());
  for (std::uint32_t em : eta_masks)
    for (std::uint32_t xm : xi_masks)
      decorated.emplace_back(
          detail::mask_bitstring(space.size(), em) + detail::mask_bitstring(space.size(), xm),
          (static_cast<std::uint64_t>(em) << 32) | xm);
  std::sort(decorated.begin(), decorated.end());
  g.keys.reserve(decorated.size());
  for (const auto& [s, k] : decorated) g.keys.push_back(k);
  for (int i = 0; i < g.n(); ++i) g.index[g.keys[i]] = i;

  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < g.n(); ++i) {
    const PairConfiguration pc = g.pair_of(i);
    for_each_coupled_transition(
        space, kernel, pc,
        [&](const PairConfiguration& next, double rate, CoupledFamily, Site, Site, Site) {
          if (rate <= 0) return;
          const std::uint64_t key =
              (static_cast<std::uint64_t>(next.eta.to_mask()) << 32) | next.xi.to_mask();
          auto it = g.index.find(key);
          if (it == g.index.end())
            throw ValidationError(
                "shell restriction needs particle-conserving dynamics, "
                "but a disappearance transition has positive rate");
          trips.emplace_back(i, it->second, rate);
          trips.emplace_back(i, i, -rate);
        });
  }
  g.Q.resize(g.n(), g.n());
  g.Q.setFromTriplets(trips.begin(), trips.end());
  return g;
}

// Strongly connected components of the positive-rate transition graph,
// iterative Tarjan, components in completion order.
inline std::vector<std::vector<int>> strongly_connected_components(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q) {
  const int n = static_cast<int>(Q.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, i); it; ++it)
      if (static_cast<int>(it.col()) != i && it.value() > 0)
        adj[i].push_back(static_cast<int>(it.col()));

  std::vector<int> disc(n, -1), low(n, 0), stack;
  std::vector<char> on_stack(n, 0);
  std::vector<std::vector<int>> comps;
  int timer = 0;

  for (int start = 0; start < n; ++start) {
    if (disc[start] >= 0) continue;
    std::vector<std::pair<int, std::size_t>> frames;
    frames.emplace_back(start, 0);
    disc[start] = low[start] = timer++;
    stack.push_back(start);
    on_stack[start] = 1;
    while (!frames.empty()) {
      const int v = frames.back().first;
      if (frames.back().second < adj[v].size()) {
        const int w = adj[v][frames.back().second++];
        if (disc[w] < 0) {
          disc[w] = low[w] = timer++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], disc[w]);
        }
        continue;
      }
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[v]);
      }
      if (low[v] == disc[v]) {
        comps.emplace_back();
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comps.back().push_back(w);
        } while (w != v);
        std::sort(comps.back().begin(), comps.back().end());
      }
    }
  }
  return comps;
}

// One closed communicating class with its stationary distribution.
struct StationaryClass {
  std::vector<int> states;   // global state indices, ascending
  Eigen::VectorXd pi;        // aligned with `states`
  double residual = 0.0;     // max |pi^T Q| over the class columns
};

namespace detail {

inline Eigen::MatrixXd class_generator(const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q,
                                       const std::vector<int>& states,
                                       const std::unordered_map<int, int>& local) {
  const int m = static_cast<int>(states.size());
  Eigen::MatrixXd Qc = Eigen::MatrixXd::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, states[a]); it; ++it) {
      auto jt = local.find(static_cast<int>(it.col()));
      if (jt != local.end()) Qc(a, jt->second) += it.value();
    }
  return Qc;
}

}  // namespace detail

// Stationary distribution of every closed class of the generator. Classes of
// up to kDenseStateLimit states are solved exactly by LU; larger ones by
// power iteration on the uniformized chain.
inline std::vector<StationaryClass> stationary_distributions(const ExactGenerator& g) {
  const auto comps = strongly_connected_components(g.Q);
  std::vector<int> comp_of(g.n(), -1);
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (int s : comps[c]) comp_of[s] = static_cast<int>(c);

  std::vector<StationaryClass> out;
  for (const auto& comp : comps) {
    bool closed = true;
    for (int s : comp) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, s);
           it && closed; ++it)
        if (it.value() > 0 && comp_of[static_cast<int>(it.col())] != comp_of[s]) closed = false;
      if (!closed) break;
    }
    if (!closed) continue;

    StationaryClass sc;
    sc.states = comp;
    const int m = static_cast<int>(comp.size());
    std::unordered_map<int, int> local;
    for (int a = 0; a < m; ++a) local[comp[a]] = a;
    const Eigen::MatrixXd Qc = detail::class_generator(g.Q, comp, local);

    if (m == 1) {
      sc.pi = Eigen::VectorXd::Ones(1);
      sc.residual = std::abs(Qc(0, 0));
    } else if (m <= kDenseStateLimit) {
      Eigen::MatrixXd A = Qc.transpose();
      A.row(0).setOnes();
      Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
      b(0) = 1.0;
      Eigen::VectorXd pi = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(b);
      sc.pi = pi.cwiseMax(0.0);
      const double total = sc.pi.sum();
      if (!(total > 0)) throw NumericalFailure("stationary solve produced a null vector");
      sc.pi /= total;
      sc.residual = (sc.pi.transpose() * Qc).cwiseAbs().maxCoeff();
      if (sc.residual > 1e-8)
        throw NumericalFailure("stationary solve residual " + std::to_string(sc.residual));
    } else {
      double lam = 0.0;
      for (int a = 0; a < m; ++a) lam = std::max(lam, -Qc(a, a));
      lam = lam * 1.05 + 1e-12;
      Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(m, 1.0 / m);
      for (long iter = 0; iter < 1000000; ++iter) {
        Eigen::RowVectorXd next = pi + (pi * Qc) / lam;
        next = next.cwiseMax(0.0);
        next /= next.sum();
        const double change = (next - pi).cwiseAbs().maxCoeff();
        pi = next;
        if (change < 1e-14) break;
      }
      sc.pi = pi.transpose();
      sc.residual = (pi * Qc).cwiseAbs().maxCoeff();
    }
    out.push_back(std::move(sc));
  }
  return out;
}

namespace detail {

// Poisson(lam) weights w_0..w_K with total mass >= 1 - 1e-12, computed in
// log space so large lam cannot underflow the window around the mode.
inline std::vector<double> poisson_weights(double lam) {
  if (lam < 0) throw ValidationError("negative uniformization rate");
  if (lam == 0) return {1.0};
  const int K = static_cast<int>(std::ceil(lam + 12.0 * std::sqrt(lam + 1.0))) + 25;
  std::vector<double> w(std::size_t(K) + 1);
  const double loglam = std::log(lam);
  double total = 0;
  for (int k = 0; k <= K; ++k) {
    w[k] = std::exp(k * loglam - lam - std::lgamma(double(k) + 1.0));
    total += w[k];
  }
  if (total < 1.0 - 1e-10)
    throw NumericalFailure("uniformization weights truncated too early");
  return w;
}

inline Eigen::SparseMatrix<double, Eigen::RowMajor> uniformized_chain(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q, double lam) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> P = Q * (1.0 / lam);
  for (int i = 0; i < P.rows(); ++i) P.coeffRef(i, i) += 1.0;
  P.makeCompressed();
  return P;
}

inline double max_exit_rate(const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q) {
  double lam = 0.0;
  for (int i = 0; i < Q.rows(); ++i) lam = std::max(lam, -Q.coeff(i, i));
  return lam;
}

}  // namespace detail

// One row of exp(tQ): the distribution at time t started from `row`.
inline Eigen::VectorXd expm_row(const ExactGenerator& g, int row, double t) {
  if (row < 0 || row >= g.n()) throw ValidationError("state index out of range");
  if (t < 0) throw ValidationError("negative time");
  const double lam = detail::max_exit_rate(g.Q);
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(g.n());
  v(row) = 1.0;
  if (lam * t == 0) return v.transpose();
  const auto w = detail::poisson_weights(lam * t);
  const auto P = detail::uniformized_chain(g.Q, lam);
  Eigen::RowVectorXd acc = w[0] * v;
  for (std::size_t k = 1; k < w.size(); ++k) {
    v = v * P;
    if (w[k] > 0) acc += w[k] * v;
  }
  Eigen::VectorXd out = acc.cwiseMax(0.0).transpose();
  const double sum = out.sum();
  if (std::abs(sum - 1.0) > 1e-9)
    throw NumericalFailure("transition row sums to " + std::to_string(sum));
  return out / sum;
}

// Full matrix exp(tQ), dense; limited to kDenseStateLimit states.
inline Eigen::MatrixXd transition_matrix(const ExactGenerator& g, double t) {
  if (g.n() > kDenseStateLimit)
    throw ValidationError("transition matrix limited to " + std::to_string(kDenseStateLimit) +
                          " states; use expm_row");
  if (t < 0) throw ValidationError("negative time");
  const double lam = detail::max_exit_rate(g.Q);
  if (lam * t == 0) return Eigen::MatrixXd::Identity(g.n(), g.n());
  const auto w = detail::poisson_weights(lam * t);
  const auto P = detail::uniformized_chain(g.Q, lam);
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(g.n(), g.n());
  Eigen::MatrixXd acc = w[0] * V;
  for (std::size_t k = 1; k < w.size(); ++k) {
    V = V * P;
    if (w[k] > 0) acc += w[k] * V;
  }
  acc = acc.cwiseMax(0.0);
  for (int i = 0; i < g.n(); ++i) {
    const double sum = acc.row(i).sum();
    if (std::abs(sum - 1.0) > 1e-9)
      throw NumericalFailure("transition row sums to " + std::to_string(sum));
    acc.row(i) /= sum;
  }
  return acc;
}

// Product measure with density rho, conditioned on the enumerated states.
inline Eigen::VectorXd product_measure(const ExactGenerator& g, double rho) {
  if (g.coupled) throw ValidationError("use pair_product_measure on a coupled generator");
  if (rho < 0 || rho > 1) throw ValidationError("density must lie in [0,1]");
  Eigen::VectorXd mu(g.n());
  const int n = g.space.size();
  for (int i = 0; i < g.n(); ++i) {
    const int k = std::popcount(static_cast<std::uint32_t>(g.keys[i]));
    mu(i) = std::pow(rho, k) * std::pow(1.0 - rho, n - k);
  }
  const double total = mu.sum();
  if (!(total > 0)) throw ValidationError("product measure vanishes on the enumerated states");
  return mu / total;
}

// Product of two per-copy product measures, conditioned on the enumeration.
inline Eigen::VectorXd pair_product_measure(const ExactGenerator& g, double rho_eta,
                                            double rho_xi) {
  if (!g.coupled) throw ValidationError("pair_product_measure needs a coupled generator");
  if (rho_eta < 0 || rho_eta > 1 || rho_xi < 0 || rho_xi > 1)
    throw ValidationError("density must lie in [0,1]");
  Eigen::VectorXd mu(g.n());
  const int n = g.space.size();
  for (int i = 0; i < g.n(); ++i) {
    const int ke = std::popcount(static_cast<std::uint32_t>(g.keys[i] >> 32));
    const int kx = std::popcount(static_cast<std::uint32_t>(g.keys[i] & 0xffffffffu));
    mu(i) = std::pow(rho_eta, ke) * std::pow(1.0 - rho_eta, n - ke) * std::pow(rho_xi, kx) *
            std::pow(1.0 - rho_xi, n - kx);
  }
  const double total = mu.sum();
  if (!(total > 0)) throw ValidationError("product measure vanishes on the enumerated states");
  return mu / total;
}

inline Eigen::VectorXd uniform_measure(const ExactGenerator& g) {
  return Eigen::VectorXd::Constant(g.n(), 1.0 / g.n());
}

inline Eigen::VectorXd point_measure(const ExactGenerator& g, int state) {
  if (state < 0 || state >= g.n()) throw ValidationError("state index out of range");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(g.n());
  mu(state) = 1.0;
  return mu;
}

// Invariance diagnostics of a measure: the raw generator residual plus the
// integral of L f_R for every occupancy cylinder f_R with |R| <= rmax,
// computed from the first-stop rate formulas rather than from Q, so the two
// routes check each other.
struct CylinderIntegral {
  std::vector<Site> sites;
  double value = 0.0;
};

struct InvarianceReport {
  double generator_residual = 0.0;  // max |mu^T Q|
  std::vector<CylinderIntegral> cylinders;

  double max_cylinder() const {
    double m = 0;
    for (const auto& c : cylinders) m = std::max(m, std::abs(c.value));
    return m;
  }
};

inline InvarianceReport invariance_report(const ExactGenerator& g, const Eigen::VectorXd& mu,
                                          int rmax) {
  if (g.coupled) throw ValidationError("invariance_report works on single-copy generators");
  if (mu.size() != g.n()) throw ValidationError("measure size does not match the state space");
  if (rmax < 1 || rmax > g.space.size()) throw ValidationError("cylinder size out of range");

  InvarianceReport rep;
  rep.generator_residual = (g.Q.transpose() * mu).cwiseAbs().maxCoeff();

  // All site subsets of size 1..rmax.
  std::vector<std::vector<Site>> subsets;
  std::vector<Site> cur;
  const int n = g.space.size();
  auto rec = [&](auto&& self, Site from) -> void {
    if (!cur.empty()) subsets.push_back(cur);
    if (static_cast<int>(cur.size()) == rmax) return;
    for (Site s = from; s < n; ++s) {
      cur.push_back(s);
      self(self, s + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);

  std::vector<double> acc(subsets.size(), 0.0);
  for (int i = 0; i < g.n(); ++i) {
    if (mu(i) == 0) continue;
    const Configuration eta = g.config_of(i);
    // One first-stop report per occupied source serves every cylinder.
    std::vector<std::optional<StopReport>> reports(n);
    auto report_of = [&](Site x) -> const StopReport& {
      if (!reports[x]) reports[x] = jump_stop_report(g.space, g.kernel, x, eta);
      return *reports[x];
    };
    for (std::size_t r = 0; r < subsets.size(); ++r) {
      const auto& R = subsets[r];
      Site vacant = -1;
      int vacancies = 0;
      for (Site y : R)
        if (!eta(y)) {
          vacant = y;
          ++vacancies;
          if (vacancies > 1) break;
        }
      if (vacancies > 1) continue;
      double lf = 0;
      if (vacancies == 1) {
        for (Site x = 0; x < n; ++x) {
          if (!eta(x)) continue;
          if (std::find(R.begin(), R.end(), x) != R.end()) continue;
          lf += report_of(x).stop_at(vacant);
        }
      } else {
        for (Site x : R) {
          const StopReport& sr = report_of(x);
          lf -= sr.move_total() + sr.vanish + sr.escape;
        }
      }
      acc[r] += mu(i) * lf;
    }
  }
  rep.cylinders.reserve(subsets.size());
  for (std::size_t r = 0; r < subsets.size(); ++r)
    rep.cylinders.push_back(CylinderIntegral{subsets[r], acc[r]});
  return rep;
}

// Coupled-order diagnostics: whether the ordered set is closed, how much
// stationary mass sits outside it, and the worst-case probability of ever
// entering it.
struct OrderedAbsorptionReport {
  bool ordered_closed = true;
  double min_hit_ordered = 1.0;      // over unordered states; 1 when none exist
  double hit_iteration_change = 0.0;
  int unordered_recurrent_states = 0;

  struct ClassRow {
    int size = 0;
    double unordered_mass = 0.0;
    double opposite_adjacent_mass = 0.0;   // kernel edge joins a (+,-) pair
    double multi_alternation_mass = 0.0;   // 2+ sign alternations along 1-d sweep
    double residual = 0.0;
  };
  std::vector<ClassRow> classes;
};

inline OrderedAbsorptionReport ordered_absorption_report(const ExactGenerator& g) {
  if (!g.coupled) throw ValidationError("ordered_absorption_report needs a coupled generator");
  OrderedAbsorptionReport rep;

  std::vector<char> ordered(g.n(), 0);
  for (int i = 0; i < g.n(); ++i) ordered[i] = g.pair_of(i).ordered();

  for (int i = 0; i < g.n(); ++i) {
    if (!ordered[i]) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, i); it; ++it)
      if (static_cast<int>(it.col()) != i && it.value() > 0 && !ordered[it.col()])
        rep.ordered_closed = false;
  }

  // Discrepancy geometry per state.
  const int ns = g.space.size();
  std::vector<Site> sweep(ns);
  for (Site s = 0; s < ns; ++s) sweep[s] = s;
  if (g.space.dimension() == 1)
    std::sort(sweep.begin(), sweep.end(),
              [&](Site a, Site b) { return g.space.coord1(a) < g.space.coord1(b); });
  auto opposite_adjacent = [&](const PairConfiguration& pc) {
    for (Site x = 0; x < ns; ++x) {
      if (pc.d(x) == 0) continue;
      for (const auto& [y, p] : g.kernel.row(g.space, x).targets)
        if (p > 0 && pc.d(x) * pc.d(y) == -1) return true;
    }
    return false;
  };
  auto alternations = [&](const PairConfiguration& pc) {
    if (g.space.dimension() != 1) return 0;
    int count = 0, last = 0;
    for (Site s : sweep) {
      const int d = pc.d(s);
      if (d == 0) continue;
      if (d < 0 && last > 0) ++count;
      last = d;
    }
    return count;
  };

  const auto classes = stationary_distributions(g);
  for (const auto& sc : classes) {
    OrderedAbsorptionReport::ClassRow row;
    row.size = static_cast<int>(sc.states.size());
    row.residual = sc.residual;
    for (std::size_t a = 0; a < sc.states.size(); ++a) {
      const int s = sc.states[a];
      if (!ordered[s]) {
        row.unordered_mass += sc.pi(a);
        ++rep.unordered_recurrent_states;
      }
      const PairConfiguration pc = g.pair_of(s);
      if (opposite_adjacent(pc)) row.opposite_adjacent_mass += sc.pi(a);
      if (alternations(pc) >= 2) row.multi_alternation_mass += sc.pi(a);
    }
    rep.classes.push_back(row);
  }

  // Probability of ever entering the ordered set, by value iteration on the
  // embedded jump chain; exact fixed point is approached monotonically from
  // below, so closed unordered classes stay at zero.
  std::vector<double> h(g.n(), 0.0);
  for (int i = 0; i < g.n(); ++i) h[i] = ordered[i] ? 1.0 : 0.0;
  bool any_unordered = false;
  for (int i = 0; i < g.n(); ++i) any_unordered = any_unordered || !ordered[i];
  if (any_unordered) {
    double change = 1.0;
    for (long iter = 0; iter < 200000 && change > 1e-13; ++iter) {
      change = 0.0;
      for (int i = 0; i < g.n(); ++i) {
        if (ordered[i]) continue;
        double rate = 0, flow = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.Q, i); it; ++it) {
          if (static_cast<int>(it.col()) == i || it.value() <= 0) continue;
          rate += it.value();
          flow += it.value() * h[it.col()];
        }
        const double next = rate > 0 ? flow / rate : 0.0;
        change = std::max(change, std::abs(next - h[i]));
        h[i] = next;
      }
    }
    rep.hit_iteration_change = change;
    rep.min_hit_ordered = 1.0;
    for (int i = 0; i < g.n(); ++i)
      if (!ordered[i]) rep.min_hit_ordered = std::min(rep.min_hit_ordered, h[i]);
  }
  return rep;
}

}  // namespace lrex
