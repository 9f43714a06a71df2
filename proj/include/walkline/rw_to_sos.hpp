#ifndef WALKLINE_RW_TO_SOS_HPP
#define WALKLINE_RW_TO_SOS_HPP

// Walk -> line translations. The +-1 walk of a half-integer coupling phi, the
// nearest-neighbour Metropolis walks (reflecting or Metropolis wall) and the
// general-step Metropolis walk, each with the SOS model whose bridge law is
// identical to the walk's bridge law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "walkline/core_model.hpp"

namespace walkline {

namespace detail {

inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

inline void check_hold_factor(double h) {
  if (!(h > 0.0 && h <= 0.5)) throw BadHoldFactor(h);
}

}  // namespace detail

// --- +-1 walks ---------------------------------------------------------------

/// phi(x) = delta/(2x) + gamma/x^2 evaluated at the half-integers 1/2 .. M-1/2.
inline EdgeCoupling power_tail_coupling(double delta, double gamma, std::size_t cutoff) {
  EdgeCoupling c;
  c.phi.resize(cutoff);
  for (std::size_t k = 0; k < cutoff; ++k) {
    const double x = static_cast<double>(k) + 0.5;
    c.phi[k] = delta / (2.0 * x) + gamma / (x * x);
  }
  c.tail = PowerTail{delta, gamma};
  return c;
}

/// Solves phi(x+1/2) = -phi(x-1/2) + ln(q_x/p_x) upward from phi(1/2) = phi_half.
/// p and q are indexed by site 0..M; entries at 0 and M are not used (both walls reflect).
inline EdgeCoupling phi_from_rates(std::span<const double> p, std::span<const double> q, double phi_half = 0.0) {
  if (p.size() != q.size() || p.size() < 2) throw std::invalid_argument("p and q must cover sites 0..M, M >= 1");
  const std::size_t cutoff = p.size() - 1;
  EdgeCoupling c;
  c.phi.resize(cutoff);
  c.phi[0] = phi_half;
  for (std::size_t x = 1; x < cutoff; ++x) {
    if (!(p[x] > 0.0 && p[x] < 1.0 && q[x] > 0.0 && q[x] < 1.0)) throw DegenerateRate(x);
    if (std::abs(p[x] + q[x] - 1.0) > kRowSumTolerance)
      throw std::invalid_argument("p + q != 1 at x=" + std::to_string(x));
    c.phi[x] = -c.phi[x - 1] + std::log(q[x] / p[x]);
  }
  return c;
}

/// Reads p_x, q_x off a nearest-neighbour kernel and inverts them.
inline EdgeCoupling phi_from_kernel(const WalkKernel& k, double phi_half = 0.0) {
  std::vector<double> p(k.states(), 0.0), q(k.states(), 0.0);
  for (std::size_t x = 1; x + 1 < k.states(); ++x) {
    p[x] = k.prob(x, x + 1);
    q[x] = k.prob(x, x - 1);
  }
  return phi_from_rates(p, q, phi_half);
}

/// P(x+1|x) = e^{-phi(x+1/2)} / (e^{-phi(x+1/2)} + e^{phi(x-1/2)}), reflection at 0 and at M.
inline WalkKernel kernel_from_phi(const EdgeCoupling& c) {
  detail::require_finite(c.phi, "phi");
  const std::size_t cutoff = c.cutoff();
  if (cutoff == 0) throw std::invalid_argument("coupling needs at least one edge");
  WalkKernel k(cutoff, 1, Structure::nearest_neighbor, WallMode::reflect);
  k.set(0, 1, 1.0);
  for (std::size_t x = 1; x < cutoff; ++x) {
    // q/p = exp(phi(x-1/2) + phi(x+1/2)); both logistic forms keep full relative precision.
    const double s = c.phi[x] + c.phi[x - 1];
    k.set(x, x + 1, 1.0 / (1.0 + std::exp(s)));
    k.set(x, x - 1, 1.0 / (1.0 + std::exp(-s)));
  }
  k.set(cutoff, cutoff - 1, 1.0);
  return k;
}

/// V(0) = -(ln 2 + phi(1/2)), V(X) = ln[(e^{-phi(X+1/2)} + e^{phi(X-1/2)})/2] for 1 <= X < M,
/// W(x,x+-1) = ln 2 and forbidden otherwise. The top row reflects, which gives
/// V(M) = phi(M-1/2) - ln 2 from the unpaired upward edge factor.
inline SosModel sos_from_phi(const EdgeCoupling& c) {
  detail::require_finite(c.phi, "phi");
  const std::size_t cutoff = c.cutoff();
  if (cutoff == 0) throw std::invalid_argument("coupling needs at least one edge");
  SosModel m;
  m.V.resize(cutoff + 1);
  m.V[0] = -(kLn2 + c.phi[0]);
  for (std::size_t x = 1; x < cutoff; ++x) {
    // ln(1 + s) with s = (e^{-b} + e^{a})/2 - 1; exact for the tiny tail values.
    const double s = 0.5 * (std::expm1(-c.phi[x]) + std::expm1(c.phi[x - 1]));
    m.V[x] = std::log1p(s);
  }
  m.V[cutoff] = c.phi[cutoff - 1] - kLn2;
  m.W = SymmetricEnergies(cutoff + 1, 1);
  for (std::size_t x = 0; x < cutoff; ++x) m.W.set(x, x + 1, Energy(kLn2));
  m.tail = c.tail;
  return m;
}

// --- nearest-neighbour Metropolis ----------------------------------------------

/// U(X) = delta ln(X+1).
inline std::vector<double> log_potential(double delta, std::size_t cutoff) {
  std::vector<double> U(cutoff + 1);
  for (std::size_t x = 0; x <= cutoff; ++x) U[x] = delta * std::log(static_cast<double>(x) + 1.0);
  return U;
}

namespace detail {

inline WalkKernel metropolis_kernel(std::span<const double> U, double hold, WallMode wall) {
  check_hold_factor(hold);
  require_finite(U, "U");
  if (U.size() < 2) throw std::invalid_argument("U must cover at least {0,1}");
  const std::size_t cutoff = U.size() - 1;
  WalkKernel k(cutoff, 1, Structure::lazy_nearest_neighbor, wall);
  if (wall == WallMode::reflect) {
    k.set(0, 1, 1.0);
  } else {
    const double up = hold * std::exp(-positive_part(U[1] - U[0]));
    k.set(0, 1, up);
    k.set(0, 0, 1.0 - up);
  }
  for (std::size_t x = 1; x <= cutoff; ++x) {
    // moves beyond the cutoff are rejected, so their mass stays at M
    const double up = x < cutoff ? hold * std::exp(-positive_part(U[x + 1] - U[x])) : 0.0;
    const double down = hold * std::exp(-positive_part(U[x - 1] - U[x]));
    if (x < cutoff) k.set(x, x + 1, up);
    k.set(x, x - 1, down);
    k.set(x, x, 1.0 - up - down);
  }
  return k;
}

}  // namespace detail

/// Metropolis walk for exp(-U) with proposal weight `hold` to each side and reflection at 0.
inline WalkKernel metropolis_reflect_kernel(std::span<const double> U, double hold = 0.5) {
  return detail::metropolis_kernel(U, hold, WallMode::reflect);
}

/// Metropolis walk including the wall row: P(1|0) = hold e^{-(U(1)-U(0))+}.
inline WalkKernel metropolis_full_kernel(std::span<const double> U, double hold = 0.5) {
  return detail::metropolis_kernel(U, hold, WallMode::metropolis_wall);
}

/// SOS energies of a Metropolis walk. The per-step constant -ln(hold) (ln 2 for the
/// standard walk) sits in step_energy; W and V are
///   W(X,X+1) = |U(X+1)-U(X)|/2,
///   W(X,X)   = -ln[1/hold - e^{-(U(X+1)-U(X))+} - e^{-(U(X-1)-U(X))+}],
///   V(0)     = ln(hold) - (U(1)-U(0))+          (reflecting wall),
///   W(0,0)   = -ln[1/hold - e^{-(U(1)-U(0))+}]  (Metropolis wall, V = 0).
inline SosModel sos_from_metropolis(std::span<const double> U, WallMode wall, double hold = 0.5) {
  detail::check_hold_factor(hold);
  detail::require_finite(U, "U");
  if (U.size() < 2) throw std::invalid_argument("U must cover at least {0,1}");
  using detail::positive_part;
  const std::size_t cutoff = U.size() - 1;
  SosModel m;
  m.V.assign(cutoff + 1, 0.0);
  m.W = SymmetricEnergies(cutoff + 1, 1);
  m.step_energy = -std::log(hold);
  for (std::size_t x = 0; x < cutoff; ++x) m.W.set(x, x + 1, Energy(0.5 * std::abs(U[x + 1] - U[x])));

  const double inv = 1.0 / hold;
  if (wall == WallMode::reflect) {
    m.V[0] = std::log(hold) - positive_part(U[1] - U[0]);
  } else {
    m.W.set(0, 0, Energy(-std::log(inv - std::exp(-positive_part(U[1] - U[0])))));
  }
  for (std::size_t x = 1; x <= cutoff; ++x) {
    const double up = x < cutoff ? std::exp(-positive_part(U[x + 1] - U[x])) : 0.0;
    const double down = std::exp(-positive_part(U[x - 1] - U[x]));
    const double mass = inv - up - down;
    if (mass < 0.0) throw NonpositiveHoldMass(x);
    if (mass == 0.0) {
      m.notes.push_back("no holding at X=" + std::to_string(x) + ": W(X,X) forbidden");
      continue;
    }
    m.W.set(x, x, Energy(-std::log(mass)));
  }
  return m;
}

// --- general-step Metropolis ----------------------------------------------------

/// Translation-invariant symmetric step law e^{-W0(X,Y)} = weight[|X-Y|], normalised over Z.
struct StepDistribution {
  std::vector<double> weight;

  std::size_t range() const { return weight.empty() ? 0 : weight.size() - 1; }
  double total() const {
    double s = weight.empty() ? 0.0 : weight[0];
    for (std::size_t d = 1; d < weight.size(); ++d) s += 2.0 * weight[d];
    return s;
  }
  Energy base_energy(std::size_t jump) const {
    return jump < weight.size() && weight[jump] > 0.0 ? Energy(-std::log(weight[jump])) : Energy::forbidden();
  }
};

/// W0 = ln 2 on +-1 steps, forbidden otherwise.
inline StepDistribution nearest_neighbor_steps() { return StepDistribution{{0.0, 0.5}}; }

/// W0(X,Y) = J|X-Y| + const for |X-Y| <= range; the constant normalises the law over Z
/// (the zero step included).
inline StepDistribution geometric_steps(double coupling, std::size_t range) {
  StepDistribution s;
  s.weight.resize(range + 1);
  for (std::size_t d = 0; d <= range; ++d) s.weight[d] = std::exp(-coupling * static_cast<double>(d));
  const double z = s.total();
  for (double& w : s.weight) w /= z;
  return s;
}

inline void check_base_kernel(const StepDistribution& base) {
  if (base.weight.empty()) throw BadBaseKernel("empty step law");
  for (double w : base.weight)
    if (!(w >= 0.0) || !std::isfinite(w)) throw BadBaseKernel("step weights must be finite and nonnegative");
  if (std::abs(base.total() - 1.0) > kRowSumTolerance)
    throw BadBaseKernel("step law sums to " + std::to_string(base.total()) + ", not 1");
}

namespace detail {

inline double general_move(const StepDistribution& base, std::span<const double> U, std::size_t x, std::size_t y) {
  const std::size_t jump = x > y ? x - y : y - x;
  if (jump >= base.weight.size()) return 0.0;
  return base.weight[jump] * std::exp(-positive_part(U[y] - U[x]));
}

}  // namespace detail

/// P(Y|X) = e^{-W0(X,Y) - (U(Y)-U(X))+} for Y != X in {0..M}; moves below 0 or above M are
/// rejected and their mass held at X.
inline WalkKernel general_metropolis_kernel(const StepDistribution& base, std::span<const double> U) {
  check_base_kernel(base);
  detail::require_finite(U, "U");
  if (U.empty()) throw std::invalid_argument("U must be non-empty");
  const std::size_t cutoff = U.size() - 1;
  WalkKernel k(cutoff, base.range(), Structure::general_step, WallMode::metropolis_wall);
  for (std::size_t x = 0; x <= cutoff; ++x) {
    double moved = 0.0;
    const std::size_t lo = x > base.range() ? x - base.range() : 0;
    const std::size_t hi = std::min(cutoff, x + base.range());
    for (std::size_t y = lo; y <= hi; ++y) {
      if (y == x) continue;
      const double p = detail::general_move(base, U, x, y);
      if (p > 0.0) k.set(x, y, p);
      moved += p;
    }
    k.set(x, x, 1.0 - moved);
  }
  return k;
}

/// W(X,Y) = W0(X,Y) + |U(Y)-U(X)|/2 for Y != X and W(X,X) = -ln P(X|X); V = 0.
inline SosModel sos_from_general(const StepDistribution& base, std::span<const double> U) {
  check_base_kernel(base);
  detail::require_finite(U, "U");
  if (U.empty()) throw std::invalid_argument("U must be non-empty");
  const std::size_t cutoff = U.size() - 1;
  SosModel m;
  m.V.assign(cutoff + 1, 0.0);
  m.W = SymmetricEnergies(cutoff + 1, base.range());
  for (std::size_t x = 0; x <= cutoff; ++x) {
    double moved = 0.0;
    const std::size_t lo = x > base.range() ? x - base.range() : 0;
    const std::size_t hi = std::min(cutoff, x + base.range());
    for (std::size_t y = lo; y <= hi; ++y) {
      if (y == x) continue;
      moved += detail::general_move(base, U, x, y);
      if (y > x) m.W.set(x, y, base.base_energy(y - x) + 0.5 * std::abs(U[y] - U[x]));
    }
    const double hold = 1.0 - moved;
    if (hold < 0.0) throw NonpositiveHoldMass(x);
    if (hold == 0.0) {
      m.notes.push_back("no holding at X=" + std::to_string(x) + ": W(X,X) forbidden");
      continue;
    }
    m.W.set(x, x, Energy(-std::log(hold)));
  }
  return m;
}

}  // namespace walkline

#endif  // WALKLINE_RW_TO_SOS_HPP
