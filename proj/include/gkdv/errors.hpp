#pragma once

#include <stdexcept>
#include <string>

namespace gkdv {

// Inputs outside an operation's documented domain (bad grids, diverged
// solves, inadmissible parameters). CLI maps this to exit code 1.
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configs or bad command-line usage. CLI maps this to exit code 2.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace gkdv
