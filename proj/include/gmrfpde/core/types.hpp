#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmrfpde {

using Real = double;
using Index = int;
using Vector = std::vector<Real>;

/// Structural problems: bad indices, inconsistent dimensions, malformed input.
class StructuralError : public std::runtime_error {
 public:
  explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionError : public StructuralError {
 public:
  explicit DimensionError(const std::string& msg) : StructuralError(msg) {}
};

/// Violation of an API precondition (invalid argument combination).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failures: breakdowns, non-convergence, singular systems.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Cholesky hit a non-positive pivot. Carries the offending index in the
/// original (unpermuted) numbering.
class NotPositiveDefiniteError : public NumericalError {
 public:
  NotPositiveDefiniteError(const std::string& msg, Index index)
      : NumericalError(msg), index_(index) {}
  Index index() const { return index_; }

 private:
  Index index_;
};

// ----- small dense-vector helpers used throughout ---------------------------

inline Real dot(const Vector& a, const Vector& b) {
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Real norm2(const Vector& a) {
  Real s = 0.0;
  for (Real v : a) s += v * v;
  return std::sqrt(s);
}

/// y += alpha * x
inline void axpy(Real alpha, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector scaled(const Vector& x, Real alpha) {
  Vector y(x);
  for (Real& v : y) v *= alpha;
  return y;
}

inline Vector vec_add(const Vector& a, const Vector& b) {
  Vector y(a);
  for (std::size_t i = 0; i < b.size(); ++i) y[i] += b[i];
  return y;
}

inline Vector vec_sub(const Vector& a, const Vector& b) {
  Vector y(a);
  for (std::size_t i = 0; i < b.size(); ++i) y[i] -= b[i];
  return y;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace gmrfpde
