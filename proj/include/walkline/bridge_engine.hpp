#ifndef WALKLINE_BRIDGE_ENGINE_HPP
#define WALKLINE_BRIDGE_ENGINE_HPP

// Exact bridge computations for walks and SOS lines alike. Both are reduced to a
// banded transfer matrix T(x,y) >= 0 with bridge weight prod_n T(X_n, X_{n+1}):
//   walk:  T(x,y) = P(y|x)
//   line:  T(x,y) = exp(-W(x,y) - step_energy - V(y))
// All vector iterations renormalise by their maximum each step and carry the log scale.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "walkline/core_model.hpp"

namespace walkline {

inline constexpr std::size_t kMaxEnumeratedBridges = 10'000'000;

class TransferMatrix {
 public:
  TransferMatrix() = default;

  explicit TransferMatrix(const WalkKernel& k)
      : weight_(k.states(), k.bandwidth(), 0.0),
        log_weight_(k.states(), k.bandwidth(), -std::numeric_limits<double>::infinity()) {
    for (std::size_t x = 0; x < k.states(); ++x)
      for (std::size_t y = weight_.row_begin(x); y < weight_.row_end(x); ++y) {
        const double p = k.prob(x, y);
        weight_.at(x, y) = p;
        log_weight_.at(x, y) = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
      }
  }

  explicit TransferMatrix(const SosModel& m)
      : weight_(m.states(), m.W.bandwidth(), 0.0),
        log_weight_(m.states(), m.W.bandwidth(), -std::numeric_limits<double>::infinity()) {
    for (std::size_t x = 0; x < m.states(); ++x)
      for (std::size_t y = weight_.row_begin(x); y < weight_.row_end(x); ++y) {
        const Energy e = m.edge_energy(x, y);
        if (e.is_forbidden()) continue;
        const double lw = -e.value() - m.V[y];
        log_weight_.at(x, y) = lw;
        weight_.at(x, y) = std::exp(lw);
      }
  }

  std::size_t states() const { return weight_.size(); }
  std::size_t cutoff() const { return states() - 1; }
  std::size_t bandwidth() const { return weight_.bandwidth(); }
  double weight(std::size_t x, std::size_t y) const { return weight_(x, y); }
  double log_weight(std::size_t x, std::size_t y) const { return log_weight_(x, y); }
  std::size_t row_begin(std::size_t x) const { return weight_.row_begin(x); }
  std::size_t row_end(std::size_t x) const { return weight_.row_end(x); }

  /// Highest state a bridge of length n can visit.
  std::size_t reach(std::size_t n) const { return std::min(cutoff(), bandwidth() * ((n + 1) / 2)); }

 private:
  BandedMatrix<double> weight_;
  BandedMatrix<double> log_weight_;
};

/// Vector with an explicit log scale: value(x) = v[x] * exp(log_scale).
struct ScaledVector {
  std::vector<double> v;
  double log_scale = 0.0;

  void renormalize() {
    const double peak = *std::max_element(v.begin(), v.end());
    if (peak <= 0.0) {
      log_scale = -std::numeric_limits<double>::infinity();
      return;
    }
    for (double& e : v) e /= peak;
    log_scale += std::log(peak);
  }
};

namespace detail {

inline ScaledVector unit_at_origin(std::size_t states) {
  ScaledVector s;
  s.v.assign(states, 0.0);
  s.v[0] = 1.0;
  return s;
}

// out(y) = sum_x in(x) T(x,y), restricted to states < limit
inline void forward_step(const TransferMatrix& t, const ScaledVector& in, ScaledVector& out, std::size_t limit) {
  out.v.assign(in.v.size(), 0.0);
  out.log_scale = in.log_scale;
  for (std::size_t x = 0; x < limit; ++x) {
    const double a = in.v[x];
    if (a == 0.0) continue;
    const std::size_t hi = std::min(t.row_end(x), limit);
    for (std::size_t y = t.row_begin(x); y < hi; ++y) out.v[y] += a * t.weight(x, y);
  }
  out.renormalize();
}

// out(x) = sum_y T(x,y) in(y)
inline void backward_step(const TransferMatrix& t, const ScaledVector& in, ScaledVector& out, std::size_t limit) {
  out.v.assign(in.v.size(), 0.0);
  out.log_scale = in.log_scale;
  for (std::size_t x = 0; x < limit; ++x) {
    double s = 0.0;
    const std::size_t hi = std::min(t.row_end(x), limit);
    for (std::size_t y = t.row_begin(x); y < hi; ++y) s += t.weight(x, y) * in.v[y];
    out.v[x] = s;
  }
  out.renormalize();
}

inline void check_path_states(const TransferMatrix& t, const BridgePath& path) {
  if (path.x.empty() || path.x.front() != 0 || path.x.back() != 0)
    throw std::invalid_argument("bridge must start and end at 0");
  for (int h : path.x)
    if (h < 0 || static_cast<std::size_t>(h) > t.cutoff())
      throw std::invalid_argument("bridge leaves {0..M}");
}

}  // namespace detail

/// Forward vector after n steps from the origin, restricted to heights a bridge of
/// length `horizon` can reach.
inline ScaledVector forward_from_origin(const TransferMatrix& t, std::size_t n, std::size_t horizon) {
  const std::size_t limit = t.reach(horizon) + 1;
  ScaledVector cur = detail::unit_at_origin(t.states()), next;
  for (std::size_t i = 0; i < n; ++i) {
    detail::forward_step(t, cur, next, limit);
    std::swap(cur, next);
  }
  return cur;
}

/// ln Z_N = ln (T^N)(0,0); for a kernel this is the N-step return probability.
inline double partition_function(const TransferMatrix& t, std::size_t n) {
  const ScaledVector f = forward_from_origin(t, n, n);
  if (f.v[0] == 0.0) return -std::numeric_limits<double>::infinity();
  return f.log_scale + std::log(f.v[0]);
}
inline double partition_function(const WalkKernel& k, std::size_t n) { return partition_function(TransferMatrix(k), n); }
inline double partition_function(const SosModel& m, std::size_t n) { return partition_function(TransferMatrix(m), n); }

/// Unnormalised log weight of a path; -inf when a step is forbidden.
inline double path_log_weight(const TransferMatrix& t, const BridgePath& path) {
  double s = 0.0;
  for (std::size_t n = 0; n + 1 < path.x.size(); ++n) {
    const int x = path.x[n], y = path.x[n + 1];
    if (x < 0 || y < 0 || static_cast<std::size_t>(std::max(x, y)) > t.cutoff())
      return -std::numeric_limits<double>::infinity();
    s += t.log_weight(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  }
  return s;
}

/// Bridge law of fixed length: log probabilities of individual bridges.
class BridgeLaw {
 public:
  BridgeLaw(TransferMatrix t, std::size_t length)
      : t_(std::move(t)), length_(length), log_z_(partition_function(t_, length)) {}

  std::size_t length() const { return length_; }
  double log_partition() const { return log_z_; }

  /// -inf for paths outside the support.
  double log_prob_or_zero(const BridgePath& path) const {
    if (path.length() != length_) throw std::invalid_argument("path length differs from the bridge length");
    return path_log_weight(t_, path) - log_z_;
  }

  double log_prob(const BridgePath& path) const {
    detail::check_path_states(t_, path);
    if (path.length() != length_) throw std::invalid_argument("path length differs from the bridge length");
    double s = 0.0;
    for (std::size_t n = 0; n < length_; ++n) {
      const double lw = t_.log_weight(static_cast<std::size_t>(path.x[n]), static_cast<std::size_t>(path.x[n + 1]));
      if (lw == -std::numeric_limits<double>::infinity()) throw ForbiddenStep(n);
      s += lw;
    }
    return s - log_z_;
  }

 private:
  TransferMatrix t_;
  std::size_t length_;
  double log_z_;
};

/// ln of prod P(X_{n+1}|X_n) / P(X_N=0|X_0=0).
inline double bridge_log_prob_rw(const WalkKernel& k, const BridgePath& path) {
  return BridgeLaw(TransferMatrix(k), path.length()).log_prob(path);
}

/// ln of Z_N^{-1} prod e^{-W} prod e^{-V}.
inline double bridge_log_weight_sos(const SosModel& m, const BridgePath& path) {
  return BridgeLaw(TransferMatrix(m), path.length()).log_prob(path);
}

/// All nonnegative bridges of length n with steps in `steps` that stay in {0..cutoff},
/// in lexicographic order of their step sequences (steps taken in ascending order).
inline std::vector<BridgePath> enumerate_bridges(std::size_t n, std::span<const int> steps, std::size_t cutoff,
                                                 std::size_t limit = kMaxEnumeratedBridges) {
  std::vector<int> sorted(steps.begin(), steps.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<BridgePath> out;
  if (sorted.empty()) return n == 0 ? std::vector<BridgePath>{BridgePath{{0}}} : out;
  const long max_down = std::max(0, -sorted.front());

  BridgePath cur;
  cur.x.assign(n + 1, 0);
  // explicit stack of (depth, next step index) to keep the order deterministic without recursion
  std::vector<std::size_t> choice(n + 1, 0);
  std::size_t depth = 0;
  while (true) {
    if (depth == n) {
      if (cur.x[n] == 0) {
        if (out.size() >= limit) throw TooLarge("more than " + std::to_string(limit) + " bridges");
        out.push_back(cur);
      }
      if (depth == 0) break;
      --depth;
      continue;
    }
    if (choice[depth] == sorted.size()) {
      choice[depth] = 0;
      if (depth == 0) break;
      --depth;
      continue;
    }
    const long next = static_cast<long>(cur.x[depth]) + sorted[choice[depth]++];
    const long remaining = static_cast<long>(n - depth - 1);
    if (next < 0 || next > static_cast<long>(cutoff) || next > remaining * max_down) continue;
    cur.x[depth + 1] = static_cast<int>(next);
    ++depth;
  }
  return out;
}

/// Probabilities of `paths` under the bridge law of `t` (zero outside the support).
inline std::vector<double> bridge_probabilities(const TransferMatrix& t, std::span<const BridgePath> paths) {
  std::vector<double> out;
  out.reserve(paths.size());
  if (paths.empty()) return out;
  const BridgeLaw law(t, paths.front().length());
  for (const auto& p : paths) out.push_back(std::exp(law.log_prob_or_zero(p)));
  return out;
}

// --- exact conditional sampling -----------------------------------------------------

/// 64-bit Mersenne twister, seeded directly. Uniform variates are built from the top
/// 53 bits so sample streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Samples exactly from the bridge law of a kernel: h_n(x) = P(X_N=0 | X_n=x) is tabulated
/// backwards, then X_{n+1} is drawn from P(y|x) h_{n+1}(y) / h_n(x).
class BridgeSampler {
 public:
  BridgeSampler(const WalkKernel& k, std::size_t length) : BridgeSampler(TransferMatrix(k), length) {}

  BridgeSampler(TransferMatrix t, std::size_t length) : t_(std::move(t)), length_(length) {
    const std::size_t limit = t_.reach(length) + 1;
    h_.resize(length + 1);
    h_[length] = detail::unit_at_origin(t_.states());
    for (std::size_t n = length; n-- > 0;) detail::backward_step(t_, h_[n + 1], h_[n], limit);
    if (h_[0].v[0] <= 0.0) throw ZeroBridgeProbability();
  }

  std::size_t length() const { return length_; }

  /// Conditional law of X_{n+1} given X_n = x on the band around x.
  std::vector<double> tilted_row(std::size_t n, std::size_t x) const {
    std::vector<double> row(t_.row_end(x) - t_.row_begin(x), 0.0);
    double total = 0.0;
    for (std::size_t y = t_.row_begin(x); y < t_.row_end(x); ++y) {
      row[y - t_.row_begin(x)] = t_.weight(x, y) * h_[n + 1].v[y];
      total += row[y - t_.row_begin(x)];
    }
    for (double& r : row) r /= total;
    return row;
  }

  /// Unscaled tilted mass sum_y P(y|x) h_{n+1}(y) / h_n(x); equals 1 up to rounding.
  double tilted_mass(std::size_t n, std::size_t x) const {
    double s = 0.0;
    for (std::size_t y = t_.row_begin(x); y < t_.row_end(x); ++y) s += t_.weight(x, y) * h_[n + 1].v[y];
    return s * std::exp(h_[n + 1].log_scale - h_[n].log_scale) / h_[n].v[x];
  }

  BridgePath sample(Rng& rng) const {
    BridgePath p;
    p.x.assign(length_ + 1, 0);
    std::size_t x = 0;
    for (std::size_t n = 0; n < length_; ++n) {
      const auto& next = h_[n + 1].v;
      double total = 0.0;
      for (std::size_t y = t_.row_begin(x); y < t_.row_end(x); ++y) total += t_.weight(x, y) * next[y];
      double u = rng.uniform() * total;
      std::size_t chosen = x;
      for (std::size_t y = t_.row_begin(x); y < t_.row_end(x); ++y) {
        const double w = t_.weight(x, y) * next[y];
        if (w <= 0.0) continue;
        chosen = y;
        if (u < w) break;
        u -= w;
      }
      x = chosen;
      p.x[n + 1] = static_cast<int>(x);
    }
    return p;
  }

 private:
  TransferMatrix t_;
  std::size_t length_;
  std::vector<ScaledVector> h_;
};

inline BridgePath sample_bridge(const WalkKernel& k, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  return BridgeSampler(k, length).sample(rng);
}

// --- marginals -----------------------------------------------------------------------

/// Law of X_n under the bridge law of length `length`, on {0..M}.
inline std::vector<double> height_marginal(const TransferMatrix& t, std::size_t length, std::size_t n) {
  if (n > length) throw std::invalid_argument("time index beyond the bridge length");
  const std::size_t limit = t.reach(length) + 1;
  const ScaledVector fwd = forward_from_origin(t, n, length);
  ScaledVector bwd = detail::unit_at_origin(t.states()), tmp;
  for (std::size_t i = n; i < length; ++i) {
    detail::backward_step(t, bwd, tmp, limit);
    std::swap(bwd, tmp);
  }
  std::vector<double> out(t.states(), 0.0);
  double total = 0.0;
  for (std::size_t x = 0; x < t.states(); ++x) {
    out[x] = fwd.v[x] * bwd.v[x];
    total += out[x];
  }
  if (total <= 0.0) throw ZeroBridgeProbability();
  for (double& p : out) p /= total;
  return out;
}
inline std::vector<double> height_marginal(const WalkKernel& k, std::size_t length, std::size_t n) {
  return height_marginal(TransferMatrix(k), length, n);
}
inline std::vector<double> height_marginal(const SosModel& m, std::size_t length, std::size_t n) {
  return height_marginal(TransferMatrix(m), length, n);
}

}  // namespace walkline

#endif  // WALKLINE_BRIDGE_ENGINE_HPP
