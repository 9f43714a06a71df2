#ifndef WALKLINE_PHASE_LAB_HPP
#define WALKLINE_PHASE_LAB_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "walkline/bridge_engine.hpp"
#include "walkline/core_model.hpp"
#include "walkline/rw_to_sos.hpp"
#include "walkline/sos_to_rw.hpp"

namespace walkline {

// --- tail exponent -------------------------------------------------------------------

struct TailFit {
  double delta = 0.0;                 ///< root above -1
  std::array<double, 2> roots{};      ///< both roots of delta(2+delta)/8 = plateau (V fits only)
  double plateau = 0.0;               ///< extrapolated X^2 V(X) or 2x phi(x)
  double half_window_spread = 0.0;    ///< |plateau(first half) - plateau(second half)|
};

namespace detail {

// least squares of y against {1, u, u^2}, u = x_min / x; returns the constant term
inline double extrapolate_plateau(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 3) throw FitUnstable("tail window holds fewer than three points");
  const double x0 = *std::min_element(xs.begin(), xs.end());
  long double ata[3][3] = {}, aty[3] = {};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double u = x0 / xs[i];
    const long double basis[3] = {1.0L, u, u * u};
    for (int r = 0; r < 3; ++r) {
      aty[r] += basis[r] * ys[i];
      for (int c = 0; c < 3; ++c) ata[r][c] += basis[r] * basis[c];
    }
  }
  // Gaussian elimination with partial pivoting on the 3x3 normal equations
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(ata[r][col]) > std::abs(ata[piv][col])) piv = r;
    std::swap(ata[col], ata[piv]);
    std::swap(aty[col], aty[piv]);
    for (int r = col + 1; r < 3; ++r) {
      const long double f = ata[r][col] / ata[col][col];
      for (int c = col; c < 3; ++c) ata[r][c] -= f * ata[col][c];
      aty[r] -= f * aty[col];
    }
  }
  long double sol[3];
  for (int r = 2; r >= 0; --r) {
    long double s = aty[r];
    for (int c = r + 1; c < 3; ++c) s -= ata[r][c] * sol[c];
    sol[r] = s / ata[r][r];
  }
  return static_cast<double>(sol[0]);
}

inline TailFit fit_plateau(const std::vector<double>& xs, const std::vector<double>& ys) {
  TailFit f;
  f.plateau = extrapolate_plateau(xs, ys);
  const std::size_t half = xs.size() / 2;
  const double first = extrapolate_plateau(std::span(xs).first(half), std::span(ys).first(half));
  const double second = extrapolate_plateau(std::span(xs).subspan(half), std::span(ys).subspan(half));
  f.half_window_spread = std::abs(first - second);
  if (f.half_window_spread > 0.1 * std::abs(f.plateau) + 1e-12) {
    std::ostringstream msg;
    msg << "tail plateau not settled: halves give " << first << " and " << second;
    throw FitUnstable(msg.str());
  }
  return f;
}

}  // namespace detail

/// delta from V(X) ~ delta(2+delta)/(8X^2), fitted on X in [lo, hi] (default [M/4, M/2]).
inline TailFit fit_tail_delta(std::span<const double> V, std::size_t lo = 0, std::size_t hi = 0) {
  const std::size_t cutoff = V.size() - 1;
  if (hi == 0) {
    lo = cutoff / 4;
    hi = cutoff / 2;
  }
  lo = std::max<std::size_t>(lo, 1);
  std::vector<double> xs, ys;
  for (std::size_t x = lo; x <= hi; ++x) {
    xs.push_back(static_cast<double>(x));
    ys.push_back(static_cast<double>(x) * static_cast<double>(x) * V[x]);
  }
  TailFit f = detail::fit_plateau(xs, ys);
  const double disc = 1.0 + 8.0 * f.plateau;
  if (disc < 0.0) throw FitUnstable("plateau below -1/8 admits no real tail exponent");
  f.roots = {-1.0 + std::sqrt(disc), -1.0 - std::sqrt(disc)};
  f.delta = f.roots[0];
  return f;
}

/// delta = lim 2x phi(x), fitted over the half-integers in [M/4, M/2].
inline TailFit fit_tail_delta(const EdgeCoupling& c) {
  const std::size_t cutoff = c.cutoff();
  std::vector<double> xs, ys;
  for (std::size_t k = std::max<std::size_t>(cutoff / 4, 1); k <= cutoff / 2 && k < cutoff; ++k) {
    const double x = static_cast<double>(k) + 0.5;
    xs.push_back(x);
    ys.push_back(2.0 * x * c.phi[k]);
  }
  TailFit f = detail::fit_plateau(xs, ys);
  f.delta = f.plateau;
  f.roots = {f.plateau, f.plateau};
  return f;
}

/// Tail metadata when present, otherwise a numeric fit.
inline double tail_delta(const SosModel& m) { return m.tail ? m.tail->delta : fit_tail_delta(m.V).delta; }
inline double tail_delta(const EdgeCoupling& c) { return c.tail ? c.tail->delta : fit_tail_delta(c).delta; }

// --- closed-form classification ------------------------------------------------------

/// Partial wetting iff delta > 1.
inline RegimeReport classify(double delta) {
  RegimeReport r;
  r.delta_estimate = delta;
  r.regime = delta > 1.0 ? Regime::partial_wetting : Regime::complete_wetting;
  r.on_boundary = delta == 1.0;
  r.evidence = delta > 1.0 ? "delta > 1: positive recurrent walk, pinned line"
                           : "delta <= 1: recurrence is at most null, line depins";
  r.diagnostics.emplace_back("delta", delta);
  return r;
}

struct SquareWell {
  double v0;
};
struct DoubleStep {
  double v0, v1;
};
using WallPreset = std::variant<SquareWell, DoubleStep>;

inline RegimeReport wall_phase_closed_form(const WallPreset& preset) {
  RegimeReport r;
  if (const auto* sw = std::get_if<SquareWell>(&preset)) {
    const SquareWellAnalysis a = square_well_analysis(sw->v0);
    r.regime = a.regime;
    r.on_boundary = a.on_boundary;
    r.evidence = "square well: transition at v0 = -ln 2";
    r.diagnostics.emplace_back("v0", sw->v0);
    if (a.second_a) r.diagnostics.emplace_back("a", *a.second_a);
  } else {
    const auto& ds = std::get<DoubleStep>(preset);
    const DoubleStepAnalysis a = double_step_analysis(ds.v0, ds.v1);
    r.regime = a.regime;
    r.on_boundary = a.on_boundary;
    r.evidence = "double step: partial wetting iff 4e^{v1} < 2 + e^{-v0}";
    r.diagnostics.emplace_back("4exp(v1)", 4.0 * std::exp(ds.v1));
    r.diagnostics.emplace_back("2+exp(-v0)", 2.0 + std::exp(-ds.v0));
  }
  return r;
}

// --- numerical order parameter ------------------------------------------------------------

inline constexpr double kPartialRatioBelow = 1.3;
inline constexpr double kCompleteRatioAbove = 1.7;
inline constexpr double kCutoffLeakTolerance = 1e-6;

struct MeanHeightDiagnostic {
  std::vector<std::size_t> lengths;
  std::vector<double> means;
  /// mean(N_{i+1}) / mean(N_i), rescaled to a factor-4 increase of N.
  std::vector<double> growth_ratios;
  Regime verdict = Regime::undecided;

  double last_ratio() const { return growth_ratios.empty() ? 0.0 : growth_ratios.back(); }
};

inline Regime verdict_from_ratio(double r) {
  if (r < kPartialRatioBelow) return Regime::partial_wetting;
  if (r > kCompleteRatioAbove) return Regime::complete_wetting;
  return Regime::undecided;
}

/// Mean midpoint height of exact bridges for each N; diffusive growth gives ratio 2,
/// pinned bridges give ratio near 1.
inline MeanHeightDiagnostic mean_height_diagnostic(const TransferMatrix& t, std::span<const std::size_t> lengths) {
  if (lengths.size() < 2) throw std::invalid_argument("need at least two bridge lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0 || lengths[i] % 2 != 0) throw std::invalid_argument("bridge lengths must be even and positive");
    if (i > 0 && lengths[i] <= lengths[i - 1]) throw std::invalid_argument("bridge lengths must increase");
  }
  MeanHeightDiagnostic d;
  const std::size_t half_cut = t.cutoff() / 2;
  for (std::size_t n : lengths) {
    const std::vector<double> p = height_marginal(t, n, n / 2);
    double mean = 0.0, leak = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
      mean += static_cast<double>(x) * p[x];
      if (x >= half_cut) leak += p[x];
    }
    if (leak > kCutoffLeakTolerance) throw CutoffTooSmall(n, leak);
    d.lengths.push_back(n);
    d.means.push_back(mean);
  }
  for (std::size_t i = 0; i + 1 < d.means.size(); ++i) {
    const double scale = std::log(4.0) / std::log(static_cast<double>(d.lengths[i + 1]) / d.lengths[i]);
    d.growth_ratios.push_back(std::pow(d.means[i + 1] / d.means[i], scale));
  }
  d.verdict = verdict_from_ratio(d.last_ratio());
  return d;
}
inline MeanHeightDiagnostic mean_height_diagnostic(const SosModel& m, std::span<const std::size_t> lengths) {
  return mean_height_diagnostic(TransferMatrix(m), lengths);
}
inline MeanHeightDiagnostic mean_height_diagnostic(const WalkKernel& k, std::span<const std::size_t> lengths) {
  return mean_height_diagnostic(TransferMatrix(k), lengths);
}

// --- scans ---------------------------------------------------------------------------------

enum class PresetFamily { square_well, double_step, power_tail };

inline std::string_view to_string(PresetFamily f) {
  switch (f) {
    case PresetFamily::square_well: return "square-well";
    case PresetFamily::double_step: return "double-step";
    case PresetFamily::power_tail: return "power-tail";
  }
  return "?";
}

/// Parameter names of each family, in grid order.
inline std::vector<std::string> parameter_names(PresetFamily f) {
  switch (f) {
    case PresetFamily::square_well: return {"v0"};
    case PresetFamily::double_step: return {"v0", "v1"};
    case PresetFamily::power_tail: return {"delta", "gamma"};
  }
  return {};
}

struct ScanOptions {
  std::vector<std::size_t> lengths{400, 1600};
  std::size_t cutoff = 2000;
  std::size_t jobs = 1;
};

struct PhaseRow {
  std::size_t index = 0;
  std::vector<double> params;
  Regime closed_form = Regime::undecided;
  Regime numeric = Regime::undecided;
  double growth_ratio = 0.0;
  double boundary_distance = 0.0;
  bool agreement = false;
  std::string error;
};

/// Euclidean distance from (v0, v1) to the curve 4e^{v1} = 2 + e^{-v0}.
inline double double_step_boundary_distance(double v0, double v1) {
  auto curve = [](double u) { return std::log((2.0 + std::exp(-u)) / 4.0); };
  auto dist2 = [&](double u) { return (u - v0) * (u - v0) + (curve(u) - v1) * (curve(u) - v1); };
  double best_u = v0, best = dist2(v0);
  for (double u = v0 - 4.0; u <= v0 + 4.0; u += 1e-3)
    if (dist2(u) < best) {
      best = dist2(u);
      best_u = u;
    }
  // golden-section refinement around the coarse minimum
  double a = best_u - 1e-3, b = best_u + 1e-3;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 60; ++i) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (dist2(c) < dist2(d))
      b = d;
    else
      a = c;
  }
  return std::sqrt(std::min(best, dist2(0.5 * (a + b))));
}

inline SosModel scan_model(PresetFamily f, std::span<const double> params, std::size_t cutoff) {
  switch (f) {
    case PresetFamily::square_well: return square_well_model(params[0], cutoff);
    case PresetFamily::double_step: return double_step_model(params[0], params[1], cutoff);
    case PresetFamily::power_tail:
      return sos_from_phi(power_tail_coupling(params[0], params.size() > 1 ? params[1] : 0.0, cutoff));
  }
  throw std::invalid_argument("unknown preset family");
}

inline PhaseRow scan_point(PresetFamily f, std::span<const double> params, const ScanOptions& opt) {
  PhaseRow row;
  row.params.assign(params.begin(), params.end());
  try {
    switch (f) {
      case PresetFamily::square_well:
        row.closed_form = wall_phase_closed_form(SquareWell{params[0]}).regime;
        row.boundary_distance = std::abs(params[0] + kLn2);
        break;
      case PresetFamily::double_step:
        row.closed_form = wall_phase_closed_form(DoubleStep{params[0], params[1]}).regime;
        row.boundary_distance = double_step_boundary_distance(params[0], params[1]);
        break;
      case PresetFamily::power_tail:
        row.closed_form = classify(params[0]).regime;
        row.boundary_distance = std::abs(params[0] - 1.0);
        break;
    }
    const MeanHeightDiagnostic d = mean_height_diagnostic(scan_model(f, params, opt.cutoff), opt.lengths);
    row.numeric = d.verdict;
    row.growth_ratio = d.last_ratio();
    row.agreement = row.numeric == row.closed_form;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.agreement = false;
  }
  return row;
}

/// One row per grid point, ordered by grid index; rows are computed on `opt.jobs` threads
/// and the result does not depend on the schedule.
inline std::vector<PhaseRow> phase_scan(PresetFamily f, const std::vector<std::vector<double>>& grid,
                                        const ScanOptions& opt) {
  const std::size_t expected = parameter_names(f).size();
  for (const auto& p : grid)
    if (p.size() != expected && !(f == PresetFamily::power_tail && p.size() == 1))
      throw std::invalid_argument("grid point has the wrong number of parameters");
  std::vector<PhaseRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      rows[i] = scan_point(f, grid[i], opt);
      rows[i].index = i;
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, grid.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return rows;
}

/// Cartesian product of per-parameter value lists, first parameter varying slowest.
inline std::vector<std::vector<double>> cartesian_grid(const std::vector<std::vector<double>>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out)
      for (double v : axis) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  if (axes.empty() || out.empty()) return {};
  return out;
}

}  // namespace walkline

#endif  // WALKLINE_PHASE_LAB_HPP
