#pragma once

#include <stdexcept>
#include <string>

namespace hqrwaci {

/// Bad invocation: unknown option values, missing required arguments.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (CSV schema, shapes, ordering).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside an iterative solver; carries iteration diagnostics.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iterations)
      : std::runtime_error(what), iterations_(iterations) {}
  [[nodiscard]] int iterations() const noexcept { return iterations_; }

 private:
  int iterations_ = 0;
};

}  // namespace hqrwaci
