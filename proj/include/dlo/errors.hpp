#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dlo {

/// Input violates an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Geometry too degenerate to evaluate (coincident points, vanishing projections).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constraint evaluation failed inside a force sweep; carries which one.
class ConstraintError : public GeometryError {
 public:
  enum class Kind { spring, volume, torsion };

  ConstraintError(Kind kind, std::size_t index, const std::string& what)
      : GeometryError(what), kind_(kind), index_(index) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t index() const noexcept { return index_; }

 private:
  Kind kind_;
  std::size_t index_;
};

/// The state left the finite / bounded region during stepping.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace dlo
