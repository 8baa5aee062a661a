#pragma once

#include <stdexcept>
#include <string>

namespace sfda {

/// Invalid input: bad configuration, malformed files, out-of-domain arguments.
/// CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure: singular systems, degenerate scores, failed factorizations.
/// CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sfda
