#ifndef WALKLINE_ACCEPTANCE_HPP
#define WALKLINE_ACCEPTANCE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "walkline/bridge_engine.hpp"
#include "walkline/io.hpp"
#include "walkline/phase_lab.hpp"
#include "walkline/rw_to_sos.hpp"
#include "walkline/sos_to_rw.hpp"

namespace walkline {

/// Tolerances of the ten acceptance checks. Every field can be overridden from the CLI.
struct Tolerances {
  double path_law = 1e-12;
  double metropolis_tv = 1e-12;
  double general_tv = 1e-12;
  double roundtrip = 1e-10;
  double ansatz = 1e-14;
  double rho = 1e-6;
  double tail_coefficient = 3.0;  ///< bound C in |8X^2 V/(delta(2+delta)) - 1| <= C/X
  double tail_delta = 1e-3;
  double row_sum = 1e-8;
  double detailed_balance = 1e-10;
  double identity = 1e-8;
  double sampler_tv = 0.005;
  double boundary_margin = 0.1;

  bool operator==(const Tolerances&) const = default;
};

struct AcceptanceOptions {
  Tolerances tol;
  std::vector<std::string> only;        ///< criterion names; empty runs all
  std::optional<std::size_t> length;    ///< overrides N of the enumeration and sampler checks
  std::uint64_t seed = 20240601;
  std::size_t samples = 1'000'000;
  std::string inject_fault;             ///< "", "sign-v"
  bool enforce_time = true;
  std::size_t jobs = 1;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double limit = 0.0;
  double seconds = 0.0;
  double time_limit = 0.0;  ///< 0 when the criterion has no runtime bound
  std::string detail;
};

inline const std::vector<std::string>& criterion_names() {
  static const std::vector<std::string> names{"equivalence", "metropolis", "general-step", "roundtrip", "square-well",
                                              "double-step", "tail",       "ground-state", "sampler",   "wetting"};
  return names;
}

inline const std::vector<std::string>& known_faults() {
  static const std::vector<std::string> faults{"sign-v"};
  return faults;
}

namespace detail {

struct Check {
  bool ok = true;
  double measured = 0.0;
  std::ostringstream detail;

  Check() { detail.precision(10); }
  void worst(double v) { measured = std::max(measured, v); }
  void fail_if(bool bad, const std::string& why) {
    if (bad) {
      ok = false;
      detail << why << "; ";
    }
  }
};

/// max |P_a - P_b| and total variation between two bridge laws on all bridges of length n.
struct LawComparison {
  double max_abs = 0.0;
  double tv = 0.0;
  std::size_t paths = 0;
};

inline LawComparison compare_laws(const TransferMatrix& a, const TransferMatrix& b, std::size_t n,
                                  std::span<const int> steps, std::size_t cutoff) {
  const auto paths = enumerate_bridges(n, steps, cutoff);
  const auto pa = bridge_probabilities(a, paths);
  const auto pb = bridge_probabilities(b, paths);
  LawComparison c;
  c.paths = paths.size();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const double d = std::abs(pa[i] - pb[i]);
    c.max_abs = std::max(c.max_abs, d);
    c.tv += 0.5 * d;
  }
  return c;
}

inline void apply_fault(const AcceptanceOptions& opt, SosModel& m) {
  if (opt.inject_fault == "sign-v")
    for (std::size_t x = 1; x < m.V.size(); ++x) m.V[x] = -m.V[x];
}

inline Check equivalence(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t N = opt.length.value_or(10), M = 10;
  for (double delta : {-1.2, -0.2, 0.5, 1.2}) {
    const EdgeCoupling phi = power_tail_coupling(delta, 0.0, M);
    const WalkKernel k = kernel_from_phi(phi);
    SosModel m = sos_from_phi(phi);
    apply_fault(opt, m);
    const auto cmp = compare_laws(TransferMatrix(k), TransferMatrix(m), N, k.step_set(), M);
    c.worst(cmp.max_abs);
    c.detail << "delta=" << delta << ": max|dP|=" << cmp.max_abs << " over " << cmp.paths << " bridges; ";
  }
  c.ok = c.measured < opt.tol.path_law;
  return c;
}

inline Check metropolis(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t N = opt.length.value_or(10), M = 10;
  const std::vector<int> steps{-1, 0, 1};
  for (double delta : {0.5, 1.0, 2.0})
    for (WallMode wall : {WallMode::reflect, WallMode::metropolis_wall}) {
      const auto U = log_potential(delta, M);
      const WalkKernel k = wall == WallMode::reflect ? metropolis_reflect_kernel(U) : metropolis_full_kernel(U);
      SosModel m = sos_from_metropolis(U, wall);
      apply_fault(opt, m);
      const auto cmp = compare_laws(TransferMatrix(k), TransferMatrix(m), N, steps, M);
      c.worst(cmp.tv);
      c.detail << "delta=" << delta << " " << to_string(wall) << ": TV=" << cmp.tv << "; ";
    }
  c.ok = c.measured < opt.tol.metropolis_tv;
  return c;
}

inline Check general_step(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t N = opt.length.value_or(8), range = 4;
  const std::size_t M = range * ((N + 1) / 2);
  const StepDistribution base = geometric_steps(1.0, range);
  const auto U = log_potential(2.0, M);
  const WalkKernel k = general_metropolis_kernel(base, U);
  SosModel m = sos_from_general(base, U);
  apply_fault(opt, m);
  const auto cmp = compare_laws(TransferMatrix(k), TransferMatrix(m), N, k.step_set(), M);
  c.measured = cmp.tv;
  c.detail << "TV=" << cmp.tv << " over " << cmp.paths << " bridges";
  c.ok = c.measured < opt.tol.general_tv;
  return c;
}

inline Check roundtrip(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t M = 512;
  const SosModel m = sos_from_phi(power_tail_coupling(1.2, 0.0, M));
  const GroundState g = perron_ground_state(m);
  const ContinuedFraction cf = continued_fraction_invert(m.V, std::log(g.rho));
  if (!cf.ok()) {
    c.ok = false;
    c.measured = INFINITY;
    c.detail << "continued fraction failed at X=" << *cf.failed_at;
    return c;
  }
  const SosModel back = sos_from_phi(cf.coupling());
  const double shift = back.V[0] - m.V[0];
  for (std::size_t x = 0; x <= M / 2; ++x) c.worst(std::abs(back.V[x] - m.V[x] - shift));
  c.detail << "rho=" << g.rho << ", constant shift " << shift << ", max deviation " << c.measured;
  c.ok = c.measured < opt.tol.roundtrip;
  return c;
}

inline Check square_well(const AcceptanceOptions& opt) {
  Check c;
  // first ansatz: closed-form validity and the actual recursion at rho = 1
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double v0 = -3.0 + 4.0 * static_cast<double>(i) / 199.0;
    const bool expected = v0 >= -kLn2;
    const bool closed = square_well_analysis(v0).first_two_b0.has_value();
    const bool recursion = continued_fraction_invert(square_well_model(v0, 2000).V, 0.0).ok();
    if (closed != expected || recursion != expected) ++mismatches;
  }
  c.fail_if(mismatches > 0, std::to_string(mismatches) + " grid points disagree with v0 >= -ln 2");
  c.detail << "first ansatz: " << mismatches << "/200 mismatches; ";

  // second ansatz: a is a fixed point of the recursion with lambda = ln rho
  double ansatz_err = 0.0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double v0 = -3.0 + 2.99 * static_cast<double>(i) / 199.0;
    const auto sw = square_well_analysis(v0);
    const double a = *sw.second_a, rho = *sw.second_rho;
    ansatz_err = std::max(ansatz_err, std::abs(2.0 * std::exp(v0) * rho - a) / a);
    ansatz_err = std::max(ansatz_err, std::abs(2.0 * rho - 1.0 / a - a) / a);
  }
  c.fail_if(!(ansatz_err <= opt.tol.ansatz), "second ansatz residual " + std::to_string(ansatz_err));
  c.detail << "second ansatz residual " << ansatz_err << "; ";

  double rho_err = 0.0;
  for (double v0 : {-1.0, -1.5, -2.0}) {
    const double a = *square_well_analysis(v0).second_a;
    const double rho = perron_ground_state(square_well_model(v0, 2000)).rho;
    rho_err = std::max(rho_err, std::abs(rho - 0.5 * (a + 1.0 / a)));
  }
  c.fail_if(!(rho_err < opt.tol.rho), "Perron rho off by " + std::to_string(rho_err));
  c.detail << "Perron rho deviation " << rho_err;
  c.measured = std::max({static_cast<double>(mismatches), ansatz_err, rho_err});
  return c;
}

inline Check double_step(const AcceptanceOptions& opt) {
  Check c;
  ScanOptions so;
  so.jobs = opt.jobs;
  const auto grid = cartesian_grid({parse_range("-2:0:5"), parse_range("-1:1:5")});
  const auto rows = phase_scan(PresetFamily::double_step, grid, so);
  std::size_t checked = 0, disagree = 0, bad_roots = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      c.fail_if(true, "row " + std::to_string(r.index) + ": " + r.error);
      continue;
    }
    if (r.boundary_distance >= opt.tol.boundary_margin) {
      ++checked;
      if (!r.agreement) ++disagree;
    }
    const auto ds = double_step_analysis(r.params[0], r.params[1]);
    if (ds.regime == Regime::partial_wetting && ds.roots.size() != (ds.v1 <= 0.0 ? 1u : 2u)) ++bad_roots;
  }
  c.fail_if(disagree > 0, std::to_string(disagree) + " disagreements");
  c.fail_if(bad_roots > 0, std::to_string(bad_roots) + " wrong root counts");
  c.measured = static_cast<double>(disagree + bad_roots);
  c.detail << checked << " of " << rows.size() << " points away from the boundary, " << disagree
           << " disagreements, " << bad_roots << " wrong root counts";
  return c;
}

inline Check tail(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t M = 800;
  double worst_fit = 0.0;
  for (double delta : {0.5, 1.2})
    for (double gamma : {0.0, 1.0}) {
      const SosModel m = sos_from_phi(power_tail_coupling(delta, gamma, M));
      const double lead = delta * (2.0 + delta) / 8.0;
      double coeff = 0.0;
      for (std::size_t x = 50; x <= 400; ++x) {
        const double X = static_cast<double>(x);
        coeff = std::max(coeff, X * std::abs(X * X * m.V[x] / lead - 1.0));
      }
      c.worst(coeff);
      double fitted = NAN;
      try {
        fitted = fit_tail_delta(m.V).delta;
      } catch (const Error& e) {
        c.fail_if(true, e.what());
      }
      const double fit_err = std::abs(fitted - delta);
      worst_fit = std::max(worst_fit, std::isnan(fit_err) ? INFINITY : fit_err);
      c.detail << "delta=" << delta << " gamma=" << gamma << ": C=" << coeff << ", fit " << fitted << "; ";
    }
  c.fail_if(!(c.measured <= opt.tol.tail_coefficient), "relative tail error exceeds C/X");
  c.fail_if(!(worst_fit < opt.tol.tail_delta), "tail fit off by " + std::to_string(worst_fit));
  return c;
}

inline Check ground_state(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t M = 2000;
  const std::vector<std::pair<std::string, SosModel>> models{
      {"square-well(-1)", square_well_model(-1.0, M)},
      {"power-tail(1.2)", sos_from_phi(power_tail_coupling(1.2, 0.0, M))}};
  for (const auto& [name, m] : models) {
    const GroundState g = perron_ground_state(m);
    const WalkKernel k = kernel_from_sos(m, g);
    double rows = 0.0;
    for (std::size_t x = 0; 2 * x <= M; ++x) rows = std::max(rows, std::abs(k.row_sum(x) - 1.0));
    const double db = detailed_balance_residual(k, g.U);
    const double id = continued_fraction_residual(m.V, std::log(g.rho), ground_state_coupling(m, g));
    c.fail_if(!(rows < opt.tol.row_sum), name + " row sums");
    c.fail_if(!(db < opt.tol.detailed_balance), name + " detailed balance");
    c.fail_if(!(id < opt.tol.identity), name + " recursion identity");
    c.worst(std::max({rows / opt.tol.row_sum, db / opt.tol.detailed_balance, id / opt.tol.identity}));
    c.detail << name << ": rho=" << g.rho << " rows " << rows << ", balance " << db << ", identity "
             << id << "; ";
  }
  c.detail << "(measured = worst ratio to tolerance)";
  return c;
}

inline Check sampler(const AcceptanceOptions& opt) {
  Check c;
  const std::size_t N = opt.length.value_or(8), M = N;
  const WalkKernel k = kernel_from_phi(power_tail_coupling(0.5, 0.0, M));
  const TransferMatrix t(k);
  const auto paths = enumerate_bridges(N, k.step_set(), M);
  const auto exact = bridge_probabilities(t, paths);
  std::vector<std::size_t> counts(paths.size(), 0);
  const BridgeSampler s(t, N);
  Rng rng(opt.seed);
  for (std::size_t i = 0; i < opt.samples; ++i) {
    const BridgePath p = s.sample(rng);
    const auto it = std::lower_bound(paths.begin(), paths.end(), p,
                                     [](const BridgePath& a, const BridgePath& b) { return a.x < b.x; });
    if (it == paths.end() || it->x != p.x) {
      c.fail_if(true, "sampled a path outside the enumeration");
      break;
    }
    ++counts[static_cast<std::size_t>(it - paths.begin())];
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i)
    tv += 0.5 * std::abs(static_cast<double>(counts[i]) / static_cast<double>(opt.samples) - exact[i]);
  c.measured = tv;
  c.fail_if(!(tv < opt.tol.sampler_tv), "TV too large");
  c.detail << opt.samples << " samples over " << paths.size() << " bridges, seed " << opt.seed << ", TV=" << tv;
  return c;
}

inline Check wetting(const AcceptanceOptions&) {
  Check c;
  const std::size_t M = 2000;
  const std::vector<std::size_t> lengths{400, 1600};
  struct Case {
    std::string name;
    SosModel model;
    Regime expected;
  };
  const std::vector<Case> cases{
      {"delta=0", sos_from_phi(power_tail_coupling(0.0, 0.0, M)), Regime::complete_wetting},
      {"delta=0.5", sos_from_phi(power_tail_coupling(0.5, 0.0, M)), Regime::complete_wetting},
      {"delta=2", sos_from_phi(power_tail_coupling(2.0, 0.0, M)), Regime::partial_wetting},
      {"delta=3", sos_from_phi(power_tail_coupling(3.0, 0.0, M)), Regime::partial_wetting},
      {"square-well(-1)", square_well_model(-1.0, M), Regime::partial_wetting},
      {"square-well(-0.3)", square_well_model(-0.3, M), Regime::complete_wetting}};
  std::size_t wrong = 0;
  for (const auto& cs : cases) {
    const auto d = mean_height_diagnostic(cs.model, lengths);
    const double r = d.last_ratio();
    bool ok = d.verdict == cs.expected;
    // power-tail complete cases must also show diffusive growth
    if (cs.name.starts_with("delta=") && cs.expected == Regime::complete_wetting) ok = ok && r >= 1.7 && r <= 2.3;
    if (!ok) ++wrong;
    c.detail << cs.name << ": r=" << r << " " << to_string(d.verdict) << "; ";
  }
  c.measured = static_cast<double>(wrong);
  c.fail_if(wrong > 0, std::to_string(wrong) + " wrong verdicts");
  return c;
}

}  // namespace detail

struct CriterionSpec {
  int id;
  std::string name;
  double time_limit;
  std::function<double(const Tolerances&)> limit;
  std::function<detail::Check(const AcceptanceOptions&)> run;
};

inline std::vector<CriterionSpec> criteria() {
  return {
      {1, "equivalence", 1.0, [](const Tolerances& t) { return t.path_law; }, detail::equivalence},
      {2, "metropolis", 5.0, [](const Tolerances& t) { return t.metropolis_tv; }, detail::metropolis},
      {3, "general-step", 0.0, [](const Tolerances& t) { return t.general_tv; }, detail::general_step},
      {4, "roundtrip", 0.0, [](const Tolerances& t) { return t.roundtrip; }, detail::roundtrip},
      {5, "square-well", 0.0, [](const Tolerances& t) { return t.ansatz; }, detail::square_well},
      {6, "double-step", 120.0, [](const Tolerances&) { return 0.0; }, detail::double_step},
      {7, "tail", 0.0, [](const Tolerances& t) { return t.tail_coefficient; }, detail::tail},
      {8, "ground-state", 0.0, [](const Tolerances&) { return 1.0; }, detail::ground_state},
      {9, "sampler", 30.0, [](const Tolerances& t) { return t.sampler_tv; }, detail::sampler},
      {10, "wetting", 60.0, [](const Tolerances&) { return 0.0; }, detail::wetting},
  };
}

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
  for (const auto& name : opt.only)
    if (std::find(criterion_names().begin(), criterion_names().end(), name) == criterion_names().end())
      throw std::invalid_argument("unknown criterion '" + name + "'");
  if (!opt.inject_fault.empty() &&
      std::find(known_faults().begin(), known_faults().end(), opt.inject_fault) == known_faults().end())
    throw std::invalid_argument("unknown fault '" + opt.inject_fault + "'");

  std::vector<CriterionResult> out;
  for (const auto& spec : criteria()) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), spec.name) == opt.only.end()) continue;
    CriterionResult r;
    r.id = spec.id;
    r.name = spec.name;
    r.limit = spec.limit(opt.tol);
    r.time_limit = spec.time_limit;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      detail::Check c = spec.run(opt);
      r.passed = c.ok;
      r.measured = c.measured;
      r.detail = c.detail.str();
    } catch (const std::exception& e) {
      r.passed = false;
      r.measured = INFINITY;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opt.enforce_time && r.time_limit > 0.0 && r.seconds > r.time_limit) {
      r.passed = false;
      r.detail += " (runtime " + std::to_string(r.seconds) + " s over the " + std::to_string(r.time_limit) + " s budget)";
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_result_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << "  measured=" << r.measured
     << " limit=" << r.limit << "  (" << std::fixed;
  os.precision(2);
  os << r.seconds << " s)  " << r.detail;
  return os.str();
}

}  // namespace walkline

#endif  // WALKLINE_ACCEPTANCE_HPP
