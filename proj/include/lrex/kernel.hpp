#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrex/errors.hpp"
#include "lrex/rng.hpp"
#include "lrex/site_space.hpp"

namespace lrex {

constexpr double kRowSumTolerance = 1e-12;

struct KernelRow {
  std::vector<std::pair<Site, double>> targets;
  double exit_left = 0.0;   // mass stepping below a segment window
  double exit_right = 0.0;  // mass stepping above a segment window
  double exit_mass() const { return exit_left + exit_right; }
};

// Single-particle jump kernel: either translation-invariant offsets or an
// explicit row-stochastic matrix. p(x,x) = 0 is enforced in both forms.
class Kernel {
 public:
  static Kernel from_offsets(std::vector<std::pair<std::vector<int>, double>> offsets) {
    Kernel k;
    k.offsets_ = std::move(offsets);
    if (k.offsets_.empty()) throw ValidationError("kernel needs at least one offset");
    const size_t dim = k.offsets_[0].first.size();
    double sum = 0;
    for (size_t i = 0; i < k.offsets_.size(); ++i) {
      const auto& [off, p] = k.offsets_[i];
      if (off.size() != dim)
        throw ValidationError("offset row " + std::to_string(i) + " has mixed dimension");
      if (p < 0)
        throw ValidationError("offset row " + std::to_string(i) + " has negative probability");
      bool zero = true;
      for (int c : off) zero = zero && c == 0;
      if (zero)
        throw ValidationError("offset row " + std::to_string(i) +
                              " is the zero offset; p(x,x) must be 0");
      for (size_t j = 0; j < i; ++j)
        if (k.offsets_[j].first == off)
          throw ValidationError("offset row " + std::to_string(i) + " repeats an offset");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw ValidationError("offset probabilities sum to " + std::to_string(sum) +
                            ", expected 1 within 1e-12");
    k.dim_ = static_cast<int>(dim);
    return k;
  }

  // 1-d convenience used throughout the tests.
  static Kernel from_offsets_1d(std::vector<std::pair<int, double>> offsets) {
    std::vector<std::pair<std::vector<int>, double>> v;
    v.reserve(offsets.size());
    for (auto& [o, p] : offsets) v.push_back({{o}, p});
    return from_offsets(std::move(v));
  }

  static Kernel nearest_neighbour(double p_right) {
    if (p_right < 0 || p_right > 1)
      throw ValidationError("nearest-neighbour p must lie in [0,1]");
    std::vector<std::pair<int, double>> off;
    if (p_right > 0) off.push_back({+1, p_right});
    if (p_right < 1) off.push_back({-1, 1 - p_right});
    return from_offsets_1d(std::move(off));
  }

  static Kernel from_matrix(std::vector<std::vector<double>> rows,
                            bool require_stochastic = true) {
    Kernel k;
    const size_t n = rows.size();
    if (n == 0) throw ValidationError("kernel matrix is empty");
    for (size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n)
        throw ValidationError("kernel matrix row " + std::to_string(i) + " has length " +
                              std::to_string(rows[i].size()) + ", expected " + std::to_string(n));
      double sum = 0;
      for (size_t j = 0; j < n; ++j) {
        if (rows[i][j] < 0)
          throw ValidationError("kernel matrix row " + std::to_string(i) +
                                " has a negative entry");
        sum += rows[i][j];
      }
      if (rows[i][i] != 0.0)
        throw ValidationError("kernel matrix row " + std::to_string(i) +
                              " has nonzero diagonal; p(x,x) must be 0");
      if (require_stochastic && std::abs(sum - 1.0) > kRowSumTolerance)
        throw ValidationError("kernel matrix row " + std::to_string(i) + " sums to " +
                              std::to_string(sum) + ", expected 1 within 1e-12");
      k.row_stochastic_ = k.row_stochastic_ && std::abs(sum - 1.0) <= kRowSumTolerance;
    }
    k.matrix_ = std::move(rows);
    k.dim_ = 1;
    return k;
  }

  static Kernel from_json(const nlohmann::json& j) {
    if (j.contains("offsets") == j.contains("matrix"))
      throw ValidationError("kernel config needs exactly one of \"offsets\" or \"matrix\"");
    if (j.contains("offsets")) {
      std::vector<std::pair<std::vector<int>, double>> offs;
      for (size_t i = 0; i < j["offsets"].size(); ++i) {
        const auto& row = j["offsets"][i];
        if (!row.is_array() || row.size() != 2)
          throw ValidationError("offset row " + std::to_string(i) +
                                " must be [offset, probability]");
        std::vector<int> off;
        if (row[0].is_number_integer())
          off = {row[0].get<int>()};
        else if (row[0].is_array())
          off = row[0].get<std::vector<int>>();
        else
          throw ValidationError("offset row " + std::to_string(i) +
                                " has a malformed offset");
        offs.push_back({off, row[1].get<double>()});
      }
      return from_offsets(std::move(offs));
    }
    return from_matrix(j["matrix"].get<std::vector<std::vector<double>>>());
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    if (is_offsets()) {
      auto& arr = j["offsets"] = nlohmann::json::array();
      for (const auto& [off, p] : offsets_) {
        if (off.size() == 1)
          arr.push_back({off[0], p});
        else
          arr.push_back({off, p});
      }
    } else {
      j["matrix"] = matrix_;
    }
    return j;
  }

  bool is_offsets() const { return !offsets_.empty(); }
  bool is_matrix() const { return !matrix_.empty(); }
  bool is_row_stochastic() const { return row_stochastic_; }
  int dimension() const { return dim_; }
  const std::vector<std::pair<std::vector<int>, double>>& offsets() const { return offsets_; }
  const std::vector<std::vector<double>>& matrix() const { return matrix_; }

  // Nearest-neighbour rightward probability when the kernel is 1-d with
  // offsets contained in {+1,-1}; nullopt otherwise.
  std::optional<double> nn_right() const {
    if (!is_offsets() || dim_ != 1) return std::nullopt;
    double p = 0;
    for (const auto& [off, prob] : offsets_) {
      if (off[0] == 1) p = prob;
      else if (off[0] != -1) return std::nullopt;
    }
    return p;
  }

  // Mean displacement vector (offsets form only).
  std::vector<double> mean_offset() const {
    if (!is_offsets()) throw ValidationError("mean offset requires an offsets kernel");
    std::vector<double> m(dim_, 0.0);
    for (const auto& [off, p] : offsets_)
      for (int ax = 0; ax < dim_; ++ax) m[ax] += p * off[ax];
    return m;
  }

  // Reverse kernel p*(x,y) = p(y,x). Offsets reverse exactly; a matrix
  // reverses to its formal transpose, row-stochastic only when the original
  // was doubly stochastic.
  Kernel reversed() const {
    if (is_offsets()) {
      auto offs = offsets_;
      for (auto& [off, p] : offs)
        for (int& c : off) c = -c;
      return from_offsets(std::move(offs));
    }
    const size_t n = matrix_.size();
    std::vector<std::vector<double>> t(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) t[j][i] = matrix_[i][j];
    return from_matrix(std::move(t), /*require_stochastic=*/false);
  }

  void validate_on(const SiteSpace& space) const {
    if (is_matrix()) {
      if (static_cast<int>(matrix_.size()) != space.size())
        throw ValidationError("kernel matrix size " + std::to_string(matrix_.size()) +
                              " does not match space size " + std::to_string(space.size()));
      return;
    }
    if (dim_ != space.dimension())
      throw ValidationError("kernel dimension does not match space dimension");
    if (space.is_torus()) {
      for (size_t i = 0; i < offsets_.size(); ++i)
        if (space.step(0, offsets_[i].first) == 0)
          throw ValidationError("offset row " + std::to_string(i) +
                                " wraps to the origin on this torus; p(x,x) must be 0");
    }
  }

  KernelRow row(const SiteSpace& space, Site s) const {
    KernelRow r;
    if (is_matrix()) {
      const auto& m = matrix_[s];
      for (size_t j = 0; j < m.size(); ++j)
        if (m[j] > 0) r.targets.push_back({static_cast<Site>(j), m[j]});
      return r;
    }
    for (const auto& [off, p] : offsets_) {
      if (p == 0) continue;
      const Site t = space.step(s, off);
      if (t >= 0) {
        bool merged = false;
        for (auto& [site, prob] : r.targets)
          if (site == t) { prob += p; merged = true; break; }
        if (!merged) r.targets.push_back({t, p});
      } else if (off[0] > 0) {
        r.exit_right += p;
      } else {
        r.exit_left += p;
      }
    }
    return r;
  }

  // Samples one step from a site; returns -1 when the step exits a segment
  // (the offset is reported through *exit_offset for exterior walks).
  Site sample_step(const SiteSpace& space, Site s, Stream& rng, int* exit_offset = nullptr) const {
    if (!row_stochastic_)
      throw ValidationError("cannot sample from a non-row-stochastic kernel");
    if (is_matrix()) {
      double u = rng.next_double();
      const auto& m = matrix_[s];
      double acc = 0;
      Site last = -1;
      for (size_t j = 0; j < m.size(); ++j) {
        if (m[j] <= 0) continue;
        acc += m[j];
        last = static_cast<Site>(j);
        if (u < acc) return last;
      }
      return last;  // guard against rounding at u ~ 1
    }
    double u = rng.next_double();
    double acc = 0;
    size_t pick = offsets_.size() - 1;
    for (size_t i = 0; i < offsets_.size(); ++i) {
      acc += offsets_[i].second;
      if (u < acc) { pick = i; break; }
    }
    const auto& off = offsets_[pick].first;
    const Site t = space.step(s, off);
    if (t < 0 && exit_offset) *exit_offset = off[0];
    return t;
  }

  // Samples an offset index directly (offsets form), used by exterior walks
  // that track raw integer coordinates.
  const std::vector<int>& sample_offset(Stream& rng) const {
    double u = rng.next_double();
    double acc = 0;
    size_t pick = offsets_.size() - 1;
    for (size_t i = 0; i < offsets_.size(); ++i) {
      acc += offsets_[i].second;
      if (u < acc) { pick = i; break; }
    }
    return offsets_[pick].first;
  }

 private:
  std::vector<std::pair<std::vector<int>, double>> offsets_;
  std::vector<std::vector<double>> matrix_;
  bool row_stochastic_ = true;
  int dim_ = 0;
};

}  // namespace lrex
