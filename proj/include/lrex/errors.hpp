#pragma once

#include <stdexcept>
#include <string>

namespace lrex {

// Bad user input: malformed kernels, inconsistent configs, violated preconditions.
// The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The requested quantity has no supported exact route on this geometry
// (e.g. an occupied-exterior boundary reached by a non-nearest-neighbour walk).
struct NotComputableError : std::runtime_error {
  explicit NotComputableError(const std::string& what) : std::runtime_error(what) {}
};

// A solver produced an unacceptable residual or failed to converge.
// The CLI maps this to exit code 3.
struct NumericalFailure : std::runtime_error {
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lrex
