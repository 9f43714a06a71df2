#ifndef WALKLINE_CORE_MODEL_HPP
#define WALKLINE_CORE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "walkline/banded.hpp"
#include "walkline/errors.hpp"

namespace walkline {

inline constexpr double kLn2 = 0.69314718055994530942;
inline constexpr double kRowSumTolerance = 1e-12;

enum class Structure { nearest_neighbor, lazy_nearest_neighbor, general_step };
enum class WallMode { reflect, metropolis_wall };

inline std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::nearest_neighbor: return "NEAREST_NEIGHBOR";
    case Structure::lazy_nearest_neighbor: return "LAZY_NEAREST_NEIGHBOR";
    case Structure::general_step: return "GENERAL_STEP";
  }
  return "?";
}

inline std::string_view to_string(WallMode w) { return w == WallMode::reflect ? "REFLECT" : "METROPOLIS_WALL"; }

inline std::optional<Structure> parse_structure(std::string_view s) {
  if (s == "NEAREST_NEIGHBOR") return Structure::nearest_neighbor;
  if (s == "LAZY_NEAREST_NEIGHBOR") return Structure::lazy_nearest_neighbor;
  if (s == "GENERAL_STEP") return Structure::general_step;
  return std::nullopt;
}

inline std::optional<WallMode> parse_wall_mode(std::string_view s) {
  if (s == "REFLECT") return WallMode::reflect;
  if (s == "METROPOLIS_WALL") return WallMode::metropolis_wall;
  return std::nullopt;
}

/// Row-stochastic transition table P(y|x) on the truncated state space {0..M}.
/// Invariants are not enforced on construction; see validate_kernel().
class WalkKernel {
 public:
  WalkKernel() = default;
  WalkKernel(std::size_t cutoff, std::size_t bandwidth, Structure structure, WallMode wall)
      : rows_(cutoff + 1, bandwidth, 0.0), structure_(structure), wall_(wall) {}

  static WalkKernel from_dense(const std::vector<std::vector<double>>& rows, Structure structure, WallMode wall) {
    const std::size_t n = rows.size();
    std::size_t band = 0;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < rows[x].size() && y < n; ++y)
        if (rows[x][y] != 0.0) band = std::max(band, x > y ? x - y : y - x);
    WalkKernel k(n == 0 ? 0 : n - 1, band, structure, wall);
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < rows[x].size() && y < n; ++y)
        if (rows[x][y] != 0.0) k.set(x, y, rows[x][y]);
    return k;
  }

  std::size_t cutoff() const { return rows_.size() == 0 ? 0 : rows_.size() - 1; }
  std::size_t states() const { return rows_.size(); }
  std::size_t bandwidth() const { return rows_.bandwidth(); }
  Structure structure() const { return structure_; }
  WallMode wall_mode() const { return wall_; }

  /// P(y | x).
  double prob(std::size_t x, std::size_t y) const { return rows_(x, y); }
  void set(std::size_t x, std::size_t y, double p) { rows_.at(x, y) = p; }

  const BandedMatrix<double>& table() const { return rows_; }

  double row_sum(std::size_t x) const {
    double s = 0.0;
    for (std::size_t y = rows_.row_begin(x); y < rows_.row_end(x); ++y) s += rows_(x, y);
    return s;
  }

  /// Steps y-x that carry positive probability from at least one state.
  std::vector<int> step_set() const {
    std::vector<int> steps;
    for (std::size_t x = 0; x < states(); ++x)
      for (std::size_t y = rows_.row_begin(x); y < rows_.row_end(x); ++y)
        if (rows_(x, y) > 0.0) steps.push_back(static_cast<int>(y) - static_cast<int>(x));
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
  }

  bool operator==(const WalkKernel&) const = default;

 private:
  BandedMatrix<double> rows_;
  Structure structure_ = Structure::nearest_neighbor;
  WallMode wall_ = WallMode::reflect;
};

/// Leading behaviour phi(x) = delta/(2x) + gamma/x^2 of a power-tail coupling, which
/// gives V(X) = delta(2+delta)/(8X^2) + O(X^-3).
struct PowerTail {
  double delta = 0.0;
  double gamma = 0.0;
  bool operator==(const PowerTail&) const = default;
};

/// Half-integer coupling of a +-1 walk: phi[k] holds phi(k + 1/2), k = 0..M-1.
struct EdgeCoupling {
  std::vector<double> phi;
  std::optional<PowerTail> tail;

  std::size_t cutoff() const { return phi.size(); }
  /// phi evaluated at the half-integer k + 1/2.
  double at_half(std::size_t k) const { return phi[k]; }
};

/// Solid-on-solid bridge model: Gibbs weight of a bridge is
///   exp(-N*step_energy - sum_n W(X_n, X_{n+1}) - sum_{n=1..N} V(X_n)).
/// step_energy carries a per-step constant (ln 2 for the 2^-N normalisation of
/// nearest-neighbour Metropolis walks); it cancels in the bridge law.
struct SosModel {
  std::vector<double> V;
  SymmetricEnergies W;
  double step_energy = 0.0;
  std::optional<PowerTail> tail;
  std::vector<std::string> notes;

  std::size_t cutoff() const { return V.empty() ? 0 : V.size() - 1; }
  std::size_t states() const { return V.size(); }
  Energy edge_energy(std::size_t x, std::size_t y) const { return W(x, y) + step_energy; }
};

/// Nonnegative integer bridge x[0] = x[N] = 0.
struct BridgePath {
  std::vector<int> x;

  std::size_t length() const { return x.empty() ? 0 : x.size() - 1; }
  bool operator==(const BridgePath&) const = default;
  auto operator<=>(const BridgePath&) const = default;
};

inline bool is_bridge(const BridgePath& p, std::span<const int> steps, std::size_t cutoff) {
  if (p.x.empty() || p.x.front() != 0 || p.x.back() != 0) return false;
  for (std::size_t n = 0; n < p.x.size(); ++n) {
    if (p.x[n] < 0 || static_cast<std::size_t>(p.x[n]) > cutoff) return false;
    if (n + 1 < p.x.size()) {
      const int d = p.x[n + 1] - p.x[n];
      if (std::find(steps.begin(), steps.end(), d) == steps.end()) return false;
    }
  }
  return true;
}

/// Perron-Frobenius pair: rho and U with exp(-U/2) the positive top eigenvector, U(0) = 0.
struct GroundState {
  double rho = 1.0;
  std::vector<double> U;
  double residual = 0.0;         ///< eigen-equation residual with psi(0) = 1
  double scaled_residual = 0.0;  ///< same residual with max psi = 1
  std::size_t iterations = 0;
};

enum class Regime { partial_wetting, complete_wetting, undecided };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::partial_wetting: return "PARTIAL_WETTING";
    case Regime::complete_wetting: return "COMPLETE_WETTING";
    case Regime::undecided: return "UNDECIDED";
  }
  return "?";
}

struct RegimeReport {
  Regime regime = Regime::complete_wetting;
  double delta_estimate = 0.0;
  bool on_boundary = false;
  std::string evidence;
  std::vector<std::pair<std::string, double>> diagnostics;
};

// --- validation -----------------------------------------------------------

struct KernelViolation {
  enum class Kind { row_sum, negative_entry, structure, reflection };
  Kind kind;
  std::size_t row;
  std::size_t column;
  double magnitude;
  std::string message;
};

inline std::vector<KernelViolation> validate_kernel(const WalkKernel& k) {
  std::vector<KernelViolation> out;
  const auto& t = k.table();
  for (std::size_t x = 0; x < k.states(); ++x) {
    const double sum = k.row_sum(x);
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "row " << x << " sums to " << sum << " (deficit " << 1.0 - sum << ")";
      out.push_back({KernelViolation::Kind::row_sum, x, x, 1.0 - sum, msg.str()});
    }
    for (std::size_t y = t.row_begin(x); y < t.row_end(x); ++y) {
      const double p = t(x, y);
      if (!(p >= 0.0)) {
        out.push_back({KernelViolation::Kind::negative_entry, x, y, p,
                       "P(" + std::to_string(y) + "|" + std::to_string(x) + ") is negative or NaN"});
        continue;
      }
      if (p == 0.0) continue;
      const std::size_t jump = x > y ? x - y : y - x;
      const bool ok = k.structure() == Structure::nearest_neighbor        ? jump == 1
                      : k.structure() == Structure::lazy_nearest_neighbor ? jump <= 1
                                                                          : true;
      if (!ok)
        out.push_back({KernelViolation::Kind::structure, x, y, p,
                       "step " + std::to_string(x) + "->" + std::to_string(y) + " not allowed for " +
                           std::string(to_string(k.structure()))});
    }
  }
  if (k.structure() == Structure::nearest_neighbor && k.wall_mode() == WallMode::reflect && k.states() > 1 &&
      std::abs(k.prob(0, 1) - 1.0) > kRowSumTolerance)
    out.push_back({KernelViolation::Kind::reflection, 0, 1, 1.0 - k.prob(0, 1), "reflecting wall needs P(1|0)=1"});
  return out;
}

/// max over x != y of |exp(-U(x)) P(y|x) - exp(-U(y)) P(x|y)|.
inline double detailed_balance_residual(const WalkKernel& k, std::span<const double> U) {
  double worst = 0.0;
  const auto& t = k.table();
  for (std::size_t x = 0; x < k.states(); ++x)
    for (std::size_t y = x + 1; y < t.row_end(x); ++y) {
      const double lhs = std::exp(-U[x]) * t(x, y);
      const double rhs = std::exp(-U[y]) * t(y, x);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  return worst;
}

/// Symmetric SOS energies W(x,y) = -1/2 ln(P(y|x) P(x|y)) read off a reversible kernel.
/// Needs no knowledge of the invariant measure. V is identically zero.
inline SosModel w_from_detailed_balance(const WalkKernel& k) {
  SosModel m;
  m.V.assign(k.states(), 0.0);
  m.W = SymmetricEnergies(k.states(), k.bandwidth());
  for (std::size_t x = 0; x < k.states(); ++x)
    for (std::size_t y = x; y < k.table().row_end(x); ++y) {
      const double pxy = k.prob(x, y);
      const double pyx = k.prob(y, x);
      if ((pxy > 0.0) != (pyx > 0.0)) throw AsymmetricSupport(x, y);
      if (pxy > 0.0)
        m.W.set(x, y, Energy(x == y ? -std::log(pxy) : -0.5 * (std::log(pxy) + std::log(pyx))));
    }
  return m;
}

}  // namespace walkline

#endif  // WALKLINE_CORE_MODEL_HPP
