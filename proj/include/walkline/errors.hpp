#ifndef WALKLINE_ERRORS_HPP
#define WALKLINE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace walkline {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The input cannot be represented mathematically (no walk, no ground state).
/// The CLI maps these to exit code 2.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class AsymmetricSupport : public Error {
 public:
  AsymmetricSupport(std::size_t x, std::size_t y)
      : Error("asymmetric support: exactly one of P(" + std::to_string(y) + "|" + std::to_string(x) +
              "), P(" + std::to_string(x) + "|" + std::to_string(y) + ") is zero"),
        x_(x),
        y_(y) {}
  std::size_t x() const { return x_; }
  std::size_t y() const { return y_; }

 private:
  std::size_t x_, y_;
};

class DegenerateRate : public Error {
 public:
  explicit DegenerateRate(std::size_t x)
      : Error("degenerate rate at x=" + std::to_string(x) + " (p must lie strictly in (0,1))"), x_(x) {}
  std::size_t site() const { return x_; }

 private:
  std::size_t x_;
};

class BadHoldFactor : public Error {
 public:
  explicit BadHoldFactor(double h) : Error("hold factor must lie in (0, 1/2], got " + std::to_string(h)) {}
};

class NonpositiveHoldMass : public Error {
 public:
  explicit NonpositiveHoldMass(std::size_t x)
      : Error("negative holding mass at x=" + std::to_string(x)), x_(x) {}
  std::size_t site() const { return x_; }

 private:
  std::size_t x_;
};

class BadBaseKernel : public Error {
 public:
  using Error::Error;
};

class PositivityFailure : public InfeasibleError {
 public:
  explicit PositivityFailure(std::size_t index)
      : InfeasibleError("continued fraction lost positivity at X=" + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class NoConvergence : public InfeasibleError {
 public:
  explicit NoConvergence(std::size_t iterations)
      : InfeasibleError("ground state solver did not converge after " + std::to_string(iterations) +
                        " iterations"),
        iterations_(iterations) {}
  std::size_t iterations() const { return iterations_; }

 private:
  std::size_t iterations_;
};

class GroundStateMismatch : public InfeasibleError {
 public:
  GroundStateMismatch(std::size_t row, double deviation)
      : InfeasibleError("ground state does not normalise row " + std::to_string(row) + " (|sum-1|=" +
                        std::to_string(deviation) + ")"),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ForbiddenStep : public Error {
 public:
  explicit ForbiddenStep(std::size_t n) : Error("path uses a forbidden step at n=" + std::to_string(n)), n_(n) {}
  std::size_t step() const { return n_; }

 private:
  std::size_t n_;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class ZeroBridgeProbability : public InfeasibleError {
 public:
  ZeroBridgeProbability() : InfeasibleError("no bridge of the requested length has positive probability") {}
};

class FitUnstable : public Error {
 public:
  using Error::Error;
};

class CutoffTooSmall : public Error {
 public:
  CutoffTooSmall(std::size_t n, double mass)
      : Error("cutoff too small for N=" + std::to_string(n) + ": mass " + std::to_string(mass) +
              " above M/2") {}
};

}  // namespace walkline

#endif  // WALKLINE_ERRORS_HPP
