#pragma once

#include <stdexcept>
#include <string>

namespace lsbd {

// Bad argument values: negative sizes, mismatched lengths, empty ranges, ...
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Structurally valid request that this build does not support
// (e.g. the coupled oracle outside its two-factor form).
struct UnsupportedSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed file content; messages carry 1-based line numbers.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed file whose rows do not cover the declared factorial grid.
struct IncompleteGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A projection target collapsed to zero (torus block at the origin,
// subgroup with no variability, ...).
struct DegenerateProjection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training run aborted (too many degenerate steps).
struct TrainFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lsbd
