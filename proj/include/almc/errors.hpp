#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace almc {

/// Invalid or inconsistent run configuration (bad step size, checkpoint
/// outside the annealing window, malformed JSON fields, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A chain left the admissible region (non-finite drift or a coordinate
/// beyond the guard threshold). Carries the chain and iteration at which
/// the run was aborted.
class BlowupError : public std::runtime_error {
 public:
  BlowupError(const std::string& what, std::size_t chain, std::size_t iteration)
      : std::runtime_error(what), chain_(chain), iteration_(iteration) {}
  std::size_t chain() const { return chain_; }
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t chain_;
  std::size_t iteration_;
};

/// A quadrature grid or histogram fails to cover enough of the reference
/// mass for the requested estimate to be meaningful.
class CoverageError : public std::runtime_error {
 public:
  CoverageError(const std::string& what, double missing_mass)
      : std::runtime_error(what), missing_mass_(missing_mass) {}
  double missing_mass() const { return missing_mass_; }

 private:
  double missing_mass_;
};

/// Test function with zero gradient energy under the measure; the
/// entropy/energy ratio is undefined.
class DegenerateTestFunctionError : public std::runtime_error {
 public:
  explicit DegenerateTestFunctionError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace almc
