#ifndef WALKLINE_BANDED_HPP
#define WALKLINE_BANDED_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace walkline {

/// Square matrix on {0..n-1} whose entries vanish (take `fill`) when |x-y| > bandwidth.
template <typename T>
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(std::size_t n, std::size_t bandwidth, T fill = T{})
      : n_(n), band_(std::min(bandwidth, n == 0 ? 0 : n - 1)), fill_(fill), data_(n * (2 * band_ + 1), fill) {}

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return band_; }

  bool in_band(std::size_t x, std::size_t y) const {
    return x < n_ && y < n_ && (x > y ? x - y : y - x) <= band_;
  }

  T operator()(std::size_t x, std::size_t y) const { return in_band(x, y) ? data_[index(x, y)] : fill_; }

  T& at(std::size_t x, std::size_t y) {
    assert(in_band(x, y));
    return data_[index(x, y)];
  }

  std::size_t row_begin(std::size_t x) const { return x > band_ ? x - band_ : 0; }
  std::size_t row_end(std::size_t x) const { return std::min(n_, x + band_ + 1); }

  bool operator==(const BandedMatrix&) const = default;

 private:
  std::size_t index(std::size_t x, std::size_t y) const { return x * (2 * band_ + 1) + (y + band_ - x); }

  std::size_t n_ = 0;
  std::size_t band_ = 0;
  T fill_{};
  std::vector<T> data_;
};

/// An edge or site energy that may be +infinity ("forbidden"). Forbidden values never
/// enter floating point arithmetic; their Boltzmann weight is exactly zero.
class Energy {
 public:
  constexpr Energy() = default;
  constexpr explicit Energy(double value) : value_(value), finite_(true) {}
  static constexpr Energy forbidden() { return Energy{}; }

  constexpr bool is_forbidden() const { return !finite_; }
  constexpr double value() const {
    assert(finite_);
    return value_;
  }
  double boltzmann() const { return finite_ ? std::exp(-value_) : 0.0; }
  double log_boltzmann() const { return finite_ ? -value_ : -std::numeric_limits<double>::infinity(); }

  constexpr Energy operator+(double shift) const { return finite_ ? Energy(value_ + shift) : Energy{}; }
  constexpr bool operator==(const Energy&) const = default;

 private:
  double value_ = 0.0;
  bool finite_ = false;
};

/// Symmetric banded energy table; only y >= x is stored so W(x,y) == W(y,x) bitwise.
class SymmetricEnergies {
 public:
  SymmetricEnergies() = default;
  SymmetricEnergies(std::size_t n, std::size_t bandwidth)
      : n_(n), band_(std::min(bandwidth, n == 0 ? 0 : n - 1)), data_(n * (band_ + 1)) {}

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return band_; }

  Energy operator()(std::size_t x, std::size_t y) const {
    if (x > y) std::swap(x, y);
    if (y >= n_ || y - x > band_) return Energy::forbidden();
    return data_[x * (band_ + 1) + (y - x)];
  }

  void set(std::size_t x, std::size_t y, Energy e) {
    if (x > y) std::swap(x, y);
    assert(y < n_ && y - x <= band_);
    data_[x * (band_ + 1) + (y - x)] = e;
  }

  bool operator==(const SymmetricEnergies&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t band_ = 0;
  std::vector<Energy> data_;
};

}  // namespace walkline

#endif  // WALKLINE_BANDED_HPP
