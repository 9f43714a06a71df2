#ifndef WALKLINE_SOS_TO_RW_HPP
#define WALKLINE_SOS_TO_RW_HPP

// Line -> walk inversions: the continued fraction for +-1 bridges, closed-form
// ansatz solutions for square-well and double-step wall potentials, and the
// Perron-Frobenius ground state route for arbitrary symmetric SOS models.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "walkline/core_model.hpp"

namespace walkline {

// --- SOS presets -----------------------------------------------------------------

/// Nearest-neighbour SOS model with W(x,x+-1) = ln 2 and potential V on {0..M}.
inline SosModel nearest_neighbor_sos(std::vector<double> V) {
  if (V.size() < 2) throw std::invalid_argument("SOS model needs at least two heights");
  SosModel m;
  m.V = std::move(V);
  m.W = SymmetricEnergies(m.V.size(), 1);
  for (std::size_t x = 0; x + 1 < m.V.size(); ++x) m.W.set(x, x + 1, Energy(kLn2));
  return m;
}

/// V(X) = v0 1_{X=0}.
inline SosModel square_well_model(double v0, std::size_t cutoff) {
  std::vector<double> V(cutoff + 1, 0.0);
  V[0] = v0;
  return nearest_neighbor_sos(std::move(V));
}

/// V(X) = v0 1_{X=0} + v1 1_{X=1}.
inline SosModel double_step_model(double v0, double v1, std::size_t cutoff) {
  std::vector<double> V(cutoff + 1, 0.0);
  V[0] = v0;
  if (cutoff >= 1) V[1] = v1;
  return nearest_neighbor_sos(std::move(V));
}

// --- continued fraction -------------------------------------------------------------

/// a_X = e^{-phi(X+1/2)} solving 2b_0 = a_0, 2b_X = a_X + 1/a_{X-1} with b_X = e^{V(X)+lambda}.
struct ContinuedFraction {
  std::vector<double> a;                  ///< computed prefix; complete (size M) on success
  std::optional<std::size_t> failed_at;   ///< first X with a_X <= 0
  double lambda = 0.0;

  bool ok() const { return !failed_at.has_value(); }

  EdgeCoupling coupling() const {
    if (failed_at) throw PositivityFailure(*failed_at);
    EdgeCoupling c;
    c.phi.resize(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) c.phi[k] = -std::log(a[k]);
    return c;
  }
};

/// Evaluates the continued fraction for edges X = 0..M-1 of a potential given on {0..M};
/// the top height only closes the truncated chain and does not determine an edge.
inline ContinuedFraction continued_fraction_invert(std::span<const double> V, double lambda) {
  if (V.size() < 2) throw std::invalid_argument("potential must cover at least {0,1}");
  ContinuedFraction out;
  out.lambda = lambda;
  const std::size_t edges = V.size() - 1;
  out.a.reserve(edges);
  for (std::size_t x = 0; x < edges; ++x) {
    const double two_b = 2.0 * std::exp(V[x] + lambda);
    const double ax = x == 0 ? two_b : two_b - 1.0 / out.a.back();
    if (!(ax > 0.0) || !std::isfinite(ax)) {
      out.failed_at = x;
      return out;
    }
    out.a.push_back(ax);
  }
  return out;
}

/// max_X |a_X + 1/a_{X-1} - 2 b_X| / (2 b_X) over the edges of `a`.
inline double continued_fraction_residual(std::span<const double> V, double lambda, std::span<const double> a) {
  double worst = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) {
    const double two_b = 2.0 * std::exp(V[x] + lambda);
    const double lhs = x == 0 ? a[0] : a[x] + 1.0 / a[x - 1];
    worst = std::max(worst, std::abs(lhs - two_b) / two_b);
  }
  return worst;
}

// --- closed forms -------------------------------------------------------------------------

struct SquareWellAnalysis {
  double v0 = 0.0;
  /// First ansatz (rho = 1): a_X = ((2b0-1)X + 2b0)/((2b0-1)X + 1); holds 2b0 when valid.
  std::optional<double> first_two_b0;
  /// Second ansatz: constant a with a^-2 = e^{-v0} - 1 and rho = (a + 1/a)/2.
  std::optional<double> second_a;
  std::optional<double> second_rho;
  Regime regime = Regime::complete_wetting;
  bool on_boundary = false;

  double first_ansatz_a(std::size_t x) const {
    const double t = *first_two_b0;
    const double X = static_cast<double>(x);
    return ((t - 1.0) * X + t) / ((t - 1.0) * X + 1.0);
  }
};

inline SquareWellAnalysis square_well_analysis(double v0) {
  SquareWellAnalysis r;
  r.v0 = v0;
  if (v0 >= -kLn2) r.first_two_b0 = 2.0 * std::exp(v0);
  if (v0 < 0.0) {
    const double a = 1.0 / std::sqrt(std::expm1(-v0));
    r.second_a = a;
    r.second_rho = 0.5 * (a + 1.0 / a);
  }
  r.regime = v0 < -kLn2 ? Regime::partial_wetting : Regime::complete_wetting;
  r.on_boundary = v0 == -kLn2;
  return r;
}

struct DoubleStepAnalysis {
  double v0 = 0.0, v1 = 0.0;
  bool first_ansatz_valid = false;  ///< 4e^{v1} >= 2 + e^{-v0}
  double first_a0 = 0.0, first_a1 = 0.0;
  /// Positive roots a of a^4(e^{v1}-1) + a^2(2e^{v1}-e^{-v0}-1) + e^{v1} = 0, ascending.
  std::vector<double> roots;
  std::vector<double> rho;  ///< (a + 1/a)/2 for each root
  /// v1 >= 0, v0 <= 0, v1 <= 2 ln cosh(v0/2); reported only for v1 >= 0.
  std::optional<bool> validity_window;
  Regime regime = Regime::complete_wetting;
  bool on_boundary = false;
};

inline DoubleStepAnalysis double_step_analysis(double v0, double v1) {
  DoubleStepAnalysis r;
  r.v0 = v0;
  r.v1 = v1;
  const double lhs = 4.0 * std::exp(v1);
  const double rhs = 2.0 + std::exp(-v0);
  r.first_ansatz_valid = lhs >= rhs;
  r.first_a0 = 2.0 * std::exp(v0);
  r.first_a1 = 2.0 * std::exp(v1) - 1.0 / r.first_a0;
  r.regime = lhs < rhs ? Regime::partial_wetting : Regime::complete_wetting;
  r.on_boundary = std::abs(lhs - rhs) <= 1e-12 * rhs;
  if (v1 >= 0.0) r.validity_window = v0 <= 0.0 && v1 <= 2.0 * std::log(std::cosh(0.5 * v0));

  // quadratic in t = a^2
  const double A = std::expm1(v1);
  const double B = 2.0 * std::exp(v1) - std::exp(-v0) - 1.0;
  const double C = std::exp(v1);
  std::vector<double> ts;
  if (A == 0.0) {
    if (B != 0.0) ts.push_back(-C / B);
  } else {
    const double disc = B * B - 4.0 * A * C;
    if (disc >= 0.0) {
      const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
      ts.push_back(q / A);
      if (q != 0.0) ts.push_back(C / q);
    } else if (std::sqrt(-disc) / (2.0 * std::abs(A)) < 1e-12) {
      ts.push_back(-B / (2.0 * A));
    }
  }
  for (double t : ts)
    if (t > 0.0 && std::isfinite(t)) r.roots.push_back(std::sqrt(t));
  std::sort(r.roots.begin(), r.roots.end());
  r.roots.erase(std::unique(r.roots.begin(), r.roots.end()), r.roots.end());
  for (double a : r.roots) r.rho.push_back(0.5 * (a + 1.0 / a));
  return r;
}

// --- Perron-Frobenius ground state -------------------------------------------------------

inline constexpr double kEigenIncrementTolerance = 1e-12;
inline constexpr std::size_t kPowerIterationCap = 1'000'000;
inline constexpr double kGroundStateResidualTolerance = 1e-10;

/// Symmetric kernel K(x,y) = exp(-W(x,y) - step_energy - V(x)/2 - V(y)/2).
inline BandedMatrix<double> symmetric_kernel(const SosModel& m) {
  BandedMatrix<double> k(m.states(), m.W.bandwidth(), 0.0);
  for (std::size_t x = 0; x < m.states(); ++x)
    for (std::size_t y = k.row_begin(x); y < k.row_end(x); ++y) {
      const Energy e = m.edge_energy(x, y);
      if (!e.is_forbidden()) k.at(x, y) = std::exp(-e.value() - 0.5 * m.V[x] - 0.5 * m.V[y]);
    }
  return k;
}

/// max_Y |sum_X psi(X) K(X,Y) - rho psi(Y)| / rho with psi = exp(-U/2), psi(0) = 1.
inline double ground_state_residual(const BandedMatrix<double>& k, std::span<const double> U, double rho) {
  double worst = 0.0;
  for (std::size_t y = 0; y < k.size(); ++y) {
    const double lpy = -0.5 * U[y];
    double s = 0.0;
    for (std::size_t x = k.row_begin(y); x < k.row_end(y); ++x) s += std::exp(-0.5 * U[x] - lpy) * k(x, y);
    worst = std::max(worst, std::abs(s - rho) * std::exp(lpy) / rho);
  }
  return worst;
}

namespace detail {

// number of eigenvalues of the symmetric tridiagonal (d, e) strictly below sigma
inline std::size_t sturm_count(std::span<const long double> d, std::span<const long double> e, long double sigma) {
  std::size_t count = 0;
  long double q = 1.0L;
  for (std::size_t i = 0; i < d.size(); ++i) {
    q = d[i] - sigma - (i == 0 ? 0.0L : e[i - 1] * e[i - 1] / q);
    if (q == 0.0L) q = -std::numeric_limits<long double>::min();
    if (q < 0.0L) ++count;
  }
  return count;
}

inline GroundState tridiagonal_ground_state(const BandedMatrix<double>& k) {
  const std::size_t n = k.size();
  // extended precision keeps the eigenvector accurate when it spreads over thousands of sites
  std::vector<long double> d(n), e(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) d[i] = k(i, i);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    e[i] = k(i, i + 1);
    if (!(e[i] > 0.0)) throw std::invalid_argument("SOS kernel is reducible (forbidden edge " + std::to_string(i) + ")");
  }
  long double lo = std::numeric_limits<long double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = (i > 0 ? e[i - 1] : 0.0) + (i + 1 < n ? e[i] : 0.0);
    lo = std::min(lo, d[i] - r);
    hi = std::max(hi, d[i] + r);
  }
  // bisection on the largest eigenvalue; keep hi >= lambda_max so every pivot below is positive
  std::size_t iterations = 0;
  while (hi - lo > 4.0L * std::numeric_limits<long double>::epsilon() * std::max(std::abs(lo), std::abs(hi)) &&
         iterations < 400) {
    const long double mid = 0.5L * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(d, e, mid) == n)
      hi = mid;
    else
      lo = mid;
    ++iterations;
  }
  const long double sigma = hi;

  // twisted factorisation of sigma - K: forward pivots p, backward pivots m
  std::vector<long double> p(n), m(n);
  for (std::size_t i = 0; i < n; ++i)
    p[i] = sigma - d[i] - (i == 0 ? 0.0L : e[i - 1] * e[i - 1] / p[i - 1]);
  for (std::size_t i = n; i-- > 0;)
    m[i] = sigma - d[i] - (i + 1 == n ? 0.0L : e[i] * e[i] / m[i + 1]);
  std::size_t twist = 0;
  long double best = std::numeric_limits<long double>::infinity();
  for (std::size_t r = 0; r < n; ++r) {
    const long double gamma = p[r] + m[r] - (sigma - d[r]);
    if (std::abs(gamma) < best) {
      best = std::abs(gamma);
      twist = r;
    }
  }
  // psi(Y)/psi(Y-1) = p[Y-1]/e[Y-1] below the twist, psi(Y+1)/psi(Y) = e[Y]/m[Y+1] above it
  std::vector<long double> log_psi(n, 0.0L);
  for (std::size_t y = twist; y-- > 0;) log_psi[y] = log_psi[y + 1] - std::log(p[y] / e[y]);
  for (std::size_t y = twist + 1; y < n; ++y) log_psi[y] = log_psi[y - 1] + std::log(e[y - 1] / m[y]);

  GroundState g;
  g.rho = static_cast<double>(hi);
  g.U.resize(n);
  for (std::size_t y = 0; y < n; ++y) g.U[y] = static_cast<double>(-2.0L * (log_psi[y] - log_psi[0]));
  g.iterations = iterations;
  return g;
}

inline GroundState power_ground_state(const BandedMatrix<double>& k) {
  const std::size_t n = k.size();
  double gersh = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double s = 0.0;
    for (std::size_t y = k.row_begin(x); y < k.row_end(x); ++y) s += k(x, y);
    gersh = std::max(gersh, s);
  }
  // the shift removes a possible -rho eigenvalue of bipartite kernels
  const double shift = 0.5 * gersh;
  std::vector<double> v(n, 1.0), w(n);
  double rho = 0.0;
  for (std::size_t it = 1; it <= kPowerIterationCap; ++it) {
    double vv = 0.0, vkv = 0.0, peak = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::size_t y = k.row_begin(x); y < k.row_end(x); ++y) s += k(x, y) * v[y];
      vkv += v[x] * s;
      vv += v[x] * v[x];
      w[x] = s;
    }
    const double next = vkv / vv;
    double res = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      res = std::max(res, std::abs(w[x] - next * v[x]));
      w[x] += shift * v[x];
      peak = std::max(peak, w[x]);
    }
    const bool settled = std::abs(next - rho) < kEigenIncrementTolerance * next && res < 1e-12 * next;
    rho = next;
    for (std::size_t x = 0; x < n; ++x) v[x] = w[x] / peak;
    if (settled) {
      GroundState g;
      g.rho = rho;
      g.U.resize(n);
      for (std::size_t x = 0; x < n; ++x) {
        if (!(v[x] > 0.0)) throw NoConvergence(it);
        g.U[x] = -2.0 * (std::log(v[x]) - std::log(v[0]));
      }
      g.iterations = it;
      return g;
    }
  }
  throw NoConvergence(kPowerIterationCap);
}

}  // namespace detail

/// Top eigenpair of the symmetric kernel exp(-W - V/2 - V/2): rho and U with psi = exp(-U/2).
/// Nearest-neighbour models are solved by Sturm bisection and a twisted factorisation in
/// log-ratio form; wider bands use shifted power iteration.
inline GroundState perron_ground_state(const SosModel& m) {
  const BandedMatrix<double> k = symmetric_kernel(m);
  GroundState g = k.bandwidth() <= 1 ? detail::tridiagonal_ground_state(k) : detail::power_ground_state(k);
  g.residual = ground_state_residual(k, g.U, g.rho);
  // a ground state localised away from the wall has psi(0) far below its peak, which
  // inflates the psi(0) = 1 residual without any loss of accuracy; gate on the peak instead
  std::vector<double> peak = g.U;
  const double u_min = *std::min_element(peak.begin(), peak.end());
  for (double& u : peak) u -= u_min;
  g.scaled_residual = ground_state_residual(k, peak, g.rho);
  if (!(g.scaled_residual < kGroundStateResidualTolerance)) throw NoConvergence(g.iterations);
  return g;
}

/// rho on successively larger truncations of the same model family; a converging
/// sequence is the only evidence the truncation gives about the infinite system.
struct RhoTrend {
  std::vector<std::size_t> cutoffs;
  std::vector<double> rho;
  /// |rho(M_last) - rho(M_prev)|, or 0 with fewer than two cutoffs.
  double last_change() const { return rho.size() < 2 ? 0.0 : std::abs(rho.back() - rho[rho.size() - 2]); }
};

template <class Factory>
RhoTrend rho_trend(Factory&& make_model, std::span<const std::size_t> cutoffs) {
  RhoTrend t;
  for (std::size_t M : cutoffs) {
    t.cutoffs.push_back(M);
    t.rho.push_back(perron_ground_state(make_model(M)).rho);
  }
  return t;
}

inline constexpr double kGroundStateMismatchTolerance = 1e-4;

/// P(y|x) = exp(-W(x,y) - V(x)/2 - V(y)/2 - U(y)/2 + U(x)/2) / rho.
inline WalkKernel kernel_from_sos(const SosModel& m, const GroundState& g) {
  const BandedMatrix<double> k = symmetric_kernel(m);
  bool lazy = false;
  for (std::size_t x = 0; x < m.states(); ++x) lazy = lazy || k(x, x) > 0.0;
  const Structure structure = k.bandwidth() > 1 ? Structure::general_step
                              : lazy             ? Structure::lazy_nearest_neighbor
                                                 : Structure::nearest_neighbor;
  const WallMode wall = k(0, 0) > 0.0 ? WallMode::metropolis_wall : WallMode::reflect;
  WalkKernel out(m.cutoff(), k.bandwidth(), structure, wall);
  for (std::size_t x = 0; x < m.states(); ++x) {
    double sum = 0.0;
    for (std::size_t y = k.row_begin(x); y < k.row_end(x); ++y) {
      if (k(x, y) == 0.0) continue;
      const double p = k(x, y) * std::exp(0.5 * (g.U[x] - g.U[y])) / g.rho;
      out.set(x, y, p);
      sum += p;
    }
    if (2 * x <= m.cutoff() && std::abs(sum - 1.0) > kGroundStateMismatchTolerance)
      throw GroundStateMismatch(x, std::abs(sum - 1.0));
  }
  return out;
}

/// a_X = exp(-U(X+1)/2 - V(X+1)/2 + U(X)/2 + V(X)/2), X = 0..M-1: the continued-fraction
/// solution carried by a ground state of a nearest-neighbour model.
inline std::vector<double> ground_state_coupling(const SosModel& m, const GroundState& g) {
  std::vector<double> a(m.cutoff());
  for (std::size_t x = 0; x < a.size(); ++x)
    a[x] = std::exp(0.5 * (-g.U[x + 1] - m.V[x + 1] + g.U[x] + m.V[x]));
  return a;
}

}  // namespace walkline

#endif  // WALKLINE_SOS_TO_RW_HPP
