#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdpanel {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, bad arguments, unreadable files. CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The data are well formed but the computation is undefined on them. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class UnbalancedPanel : public InputError {
 public:
  using InputError::InputError;
};

class DuplicateCell : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateUnitScale : public NumericalError {
 public:
  explicit DegenerateUnitScale(std::size_t unit)
      : NumericalError("degenerate residual scale for unit " + std::to_string(unit) +
                       " (mean square at or below floor)"),
        unit_(unit) {}
  std::size_t unit() const noexcept { return unit_; }

 private:
  std::size_t unit_;
};

class RankDeficient : public NumericalError {
 public:
  explicit RankDeficient(std::size_t m)
      : NumericalError("panel does not support " + std::to_string(m) +
                       " principal components (eigenvalue below relative floor)"),
        m_(m) {}
  std::size_t components() const noexcept { return m_; }

 private:
  std::size_t m_;
};

class DegenerateCorrection : public NumericalError {
 public:
  DegenerateCorrection()
      : NumericalError("bias correction undefined: 1 - theta_hat at or below floor") {}
};

class SingularUnitDesign : public NumericalError {
 public:
  explicit SingularUnitDesign(std::size_t unit)
      : NumericalError("singular CCE design for unit " + std::to_string(unit)), unit_(unit) {}
  std::size_t unit() const noexcept { return unit_; }

 private:
  std::size_t unit_;
};

class SingularCommonDesign : public NumericalError {
 public:
  SingularCommonDesign() : NumericalError("common observed-factor matrix D'D is singular") {}
};

class SingularDesign : public NumericalError {
 public:
  SingularDesign() : NumericalError("regressor cross-product matrix is singular") {}
};

class SingularSpatialSystem : public NumericalError {
 public:
  SingularSpatialSystem() : NumericalError("I - rho*W is numerically singular") {}
};

}  // namespace cdpanel
