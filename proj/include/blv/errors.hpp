#pragma once

#include <stdexcept>
#include <string>

namespace blv {

// Malformed or inconsistent input data: bad files, dimension mismatches,
// out-of-range records. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric domain violations and guard trips: logit of 0/1, rejection-sampling
// attempt caps, exhaustive-search size guard. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace blv
