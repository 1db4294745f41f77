#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "lrex/errors.hpp"

namespace lrex {

using Site = int;

enum class BoundaryPolicy {
  OpenEscape,        // walks leaving the window are absorbed as "escaped"
  OccupiedExterior,  // the exterior is fully occupied; walks may continue outside
};

// Finite site space: a d-dimensional torus or a 1-d segment of Z.
// Segment sites are indexed 0..length-1 and carry signed coordinates
// centred at length/2, so coordinate 0 sits mid-window.
class SiteSpace {
 public:
  static SiteSpace torus(std::vector<int> dims) {
    if (dims.empty()) throw ValidationError("torus needs at least one dimension");
    for (int d : dims)
      if (d < 2) throw ValidationError("torus dimensions must be >= 2");
    SiteSpace s;
    s.torus_ = true;
    s.dims_ = std::move(dims);
    s.size_ = std::accumulate(s.dims_.begin(), s.dims_.end(), 1, std::multiplies<int>());
    return s;
  }

  static SiteSpace segment(int length, BoundaryPolicy policy = BoundaryPolicy::OpenEscape) {
    if (length < 1) throw ValidationError("segment length must be >= 1");
    SiteSpace s;
    s.torus_ = false;
    s.dims_ = {length};
    s.size_ = length;
    s.policy_ = policy;
    return s;
  }

  bool is_torus() const { return torus_; }
  bool is_segment() const { return !torus_; }
  BoundaryPolicy boundary() const { return policy_; }
  int size() const { return size_; }
  int dimension() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }

  // Signed coordinates. Torus: each axis mapped to (-d/2, d/2]; segment:
  // index minus length/2. One-dimensional helpers below.
  std::vector<int> coords(Site s) const {
    std::vector<int> c(dims_.size());
    int rem = s;
    for (int ax = static_cast<int>(dims_.size()) - 1; ax >= 0; --ax) {
      const int d = dims_[ax];
      int v = rem % d;
      rem /= d;
      if (torus_) {
        if (v > d / 2) v -= d;
      } else {
        v -= d / 2;
      }
      c[ax] = v;
    }
    return c;
  }

  int coord1(Site s) const {
    if (dims_.size() != 1) throw ValidationError("coord1 requires a 1-d space");
    return coords(s)[0];
  }

  // Site for a signed coordinate vector; -1 when outside a segment.
  Site site_at(const std::vector<int>& c) const {
    if (c.size() != dims_.size()) throw ValidationError("coordinate dimension mismatch");
    int idx = 0;
    for (size_t ax = 0; ax < dims_.size(); ++ax) {
      const int d = dims_[ax];
      long v = c[ax];
      if (torus_) {
        v = ((v % d) + d) % d;
      } else {
        v += d / 2;
        if (v < 0 || v >= d) return -1;
      }
      idx = idx * d + static_cast<int>(v);
    }
    return idx;
  }

  // Applies an offset to a site. Returns -1 when the step leaves a segment.
  Site step(Site s, const std::vector<int>& offset) const {
    int idx = 0;
    int rem = s;
    // Recompute per-axis indices to avoid allocating via coords().
    std::vector<int> raw(dims_.size());
    for (int ax = static_cast<int>(dims_.size()) - 1; ax >= 0; --ax) {
      raw[ax] = rem % dims_[ax];
      rem /= dims_[ax];
    }
    for (size_t ax = 0; ax < dims_.size(); ++ax) {
      const int d = dims_[ax];
      long v = raw[ax] + static_cast<long>(offset[ax]);
      if (torus_) {
        v = ((v % d) + d) % d;
      } else if (v < 0 || v >= d) {
        return -1;
      }
      idx = idx * d + static_cast<int>(v);
    }
    return idx;
  }

  // Sites whose every signed coordinate lies in [-radius, radius].
  std::vector<Site> window(int radius) const {
    std::vector<Site> out;
    for (Site s = 0; s < size_; ++s) {
      bool in = true;
      for (int c : coords(s))
        if (c < -radius || c > radius) { in = false; break; }
      if (in) out.push_back(s);
    }
    return out;
  }

  std::string describe() const {
    std::string d = torus_ ? "torus(" : "segment(";
    for (size_t i = 0; i < dims_.size(); ++i) {
      if (i) d += "x";
      d += std::to_string(dims_[i]);
    }
    if (!torus_)
      d += policy_ == BoundaryPolicy::OpenEscape ? ", open-escape" : ", occupied-exterior";
    return d + ")";
  }

 private:
  SiteSpace() = default;
  bool torus_ = true;
  std::vector<int> dims_;
  int size_ = 0;
  BoundaryPolicy policy_ = BoundaryPolicy::OpenEscape;
};

}  // namespace lrex
