#include <gtest/gtest.h>

#include <cmath>

#include "walkline/phase_lab.hpp"

using namespace walkline;

TEST(Classify, ThresholdAtOne) {
  EXPECT_EQ(classify(1.2).regime, Regime::partial_wetting);
  EXPECT_EQ(classify(1.0).regime, Regime::complete_wetting);
  EXPECT_TRUE(classify(1.0).on_boundary);
  EXPECT_EQ(classify(0.5).regime, Regime::complete_wetting);
  EXPECT_EQ(classify(-1.2).regime, Regime::complete_wetting);
  EXPECT_EQ(classify(1.2).delta_estimate, 1.2);
}

TEST(ClassifyProperty, MonotoneInDelta) {
  bool seen_partial = false;
  for (int i = 0; i <= 400; ++i) {
    const double delta = -2.0 + 5.0 * i / 400.0;
    const bool partial = classify(delta).regime == Regime::partial_wetting;
    EXPECT_FALSE(seen_partial && !partial) << delta;
    seen_partial = seen_partial || partial;
  }
  EXPECT_TRUE(seen_partial);
}

TEST(ClosedForm, WallPresets) {
  EXPECT_EQ(wall_phase_closed_form(SquareWell{-1.0}).regime, Regime::partial_wetting);
  EXPECT_EQ(wall_phase_closed_form(SquareWell{-0.5}).regime, Regime::complete_wetting);
  EXPECT_EQ(wall_phase_closed_form(DoubleStep{-3.0, 0.1}).regime, Regime::partial_wetting);
  EXPECT_EQ(wall_phase_closed_form(DoubleStep{0.0, 0.0}).regime, Regime::complete_wetting);
  // a repulsive second step pushes the transition to a deeper well
  EXPECT_EQ(wall_phase_closed_form(DoubleStep{-1.0, 1.0}).regime, Regime::complete_wetting);
  EXPECT_EQ(wall_phase_closed_form(DoubleStep{-0.5, -1.0}).regime, Regime::partial_wetting);
}

TEST(ClosedForm, DoubleStepBoundaryDistance) {
  // the boundary passes through v1 = ln(3/4) at v0 = 0
  EXPECT_NEAR(double_step_boundary_distance(0.0, std::log(0.75)), 0.0, 1e-9);
  // brute-force minimum over a fine sampling of the curve v1 = ln((2 + e^{-u})/4)
  for (auto [v0, v1] : {std::pair{-2.0, 1.0}, std::pair{0.0, 0.0}, std::pair{-1.0, -1.0}, std::pair{-2.0, -0.5}}) {
    double best = 1e300;
    for (int i = 0; i <= 2000000; ++i) {
      const double u = -8.0 + 16.0 * i / 2000000.0;
      const double c = std::log((2.0 + std::exp(-u)) / 4.0);
      best = std::min(best, std::hypot(u - v0, c - v1));
    }
    EXPECT_NEAR(double_step_boundary_distance(v0, v1), best, 1e-5) << v0 << " " << v1;
  }
}

// --- tail fits -----------------------------------------------------------------------

TEST(TailFitTest, PowerTailWithLargeGamma) {
  const SosModel m = sos_from_phi(power_tail_coupling(1.2, 7.0, 2000));
  EXPECT_NEAR(fit_tail_delta(m.V).delta, 1.2, 1e-3);
  EXPECT_EQ(tail_delta(m), 1.2);  // metadata wins
  SosModel stripped = m;
  stripped.tail.reset();
  EXPECT_NEAR(tail_delta(stripped), 1.2, 1e-3);
}

TEST(TailFitTest, RecoversDeltaAcrossRange) {
  for (double delta : {-0.5, 0.5, 1.2, 2.0}) {
    const EdgeCoupling c = power_tail_coupling(delta, 1.0, 2000);
    const TailFit f = fit_tail_delta(sos_from_phi(c).V);
    EXPECT_NEAR(f.delta, delta, 1e-3) << delta;
    EXPECT_NEAR(f.roots[0] + f.roots[1], -2.0, 1e-12);  // delta and -2-delta share the plateau
    EXPECT_NEAR(fit_tail_delta(c).delta, delta, 1e-6);
  }
}

TEST(TailFitTest, FlatPotentialGivesZero) {
  EXPECT_NEAR(fit_tail_delta(std::vector<double>(401, 0.0)).delta, 0.0, 1e-15);
}

TEST(TailFitTest, SquareWellFirstAnsatzWalk) {
  const SosModel m = square_well_model(-0.3, 2000);
  const EdgeCoupling c = continued_fraction_invert(m.V, 0.0).coupling();
  EXPECT_NEAR(tail_delta(c), -2.0, 1e-3);
  EXPECT_EQ(classify(tail_delta(c)).regime, Regime::complete_wetting);
}

TEST(TailFitTest, UnsettledTailThrows) {
  std::vector<double> V(401, 0.0);
  for (std::size_t x = 150; x <= 200; ++x) V[x] = 1.0;  // bump in the second half of the window
  EXPECT_THROW(fit_tail_delta(V), FitUnstable);
  std::vector<double> deep(401);
  for (std::size_t x = 1; x < deep.size(); ++x) deep[x] = -1.0 / (x * static_cast<double>(x));
  EXPECT_THROW(fit_tail_delta(deep), FitUnstable);  // plateau -1 < -1/8
}

// --- mean-height diagnostic ----------------------------------------------------------

TEST(Verdict, RatioBands) {
  EXPECT_EQ(verdict_from_ratio(1.0), Regime::partial_wetting);
  EXPECT_EQ(verdict_from_ratio(1.5), Regime::undecided);
  EXPECT_EQ(verdict_from_ratio(2.0), Regime::complete_wetting);
}

TEST(Diagnostic, PinnedAndFreeLines) {
  const std::vector<std::size_t> lengths{400, 1600};
  const auto pinned = mean_height_diagnostic(square_well_model(-2.0, 2000), lengths);
  EXPECT_EQ(pinned.verdict, Regime::partial_wetting);
  EXPECT_NEAR(pinned.last_ratio(), 1.0, 0.05);
  const auto free = mean_height_diagnostic(square_well_model(0.0, 2000), lengths);
  EXPECT_EQ(free.verdict, Regime::complete_wetting);
  EXPECT_NEAR(free.last_ratio(), 2.0, 0.1);
}

TEST(Diagnostic, RatioRescaledToFactorFour) {
  // free bridge mean grows like sqrt(N) whatever the spacing of lengths
  const std::vector<std::size_t> two{400, 800};
  EXPECT_NEAR(mean_height_diagnostic(square_well_model(0.0, 2000), two).last_ratio(), 2.0, 0.1);
}

TEST(Diagnostic, InputChecks) {
  const SosModel m = square_well_model(0.0, 200);
  EXPECT_THROW(mean_height_diagnostic(m, std::vector<std::size_t>{100}), std::invalid_argument);
  EXPECT_THROW(mean_height_diagnostic(m, std::vector<std::size_t>{100, 51}), std::invalid_argument);
  EXPECT_THROW(mean_height_diagnostic(m, std::vector<std::size_t>{100, 80}), std::invalid_argument);
  EXPECT_THROW(mean_height_diagnostic(m, std::vector<std::size_t>{100, 1600}), CutoffTooSmall);
}

static void expect_gamma_independent(double gamma) {
  const std::vector<std::size_t> lengths{400, 1600};
  for (double delta : {0.5, 2.0}) {
    const auto d = mean_height_diagnostic(sos_from_phi(power_tail_coupling(delta, gamma, 2000)), lengths);
    EXPECT_EQ(d.verdict, classify(delta).regime) << delta << " " << gamma << " ratio " << d.last_ratio();
  }
}

TEST(DiagnosticProperty, GammaIndependentVerdictSmallGamma) {
  expect_gamma_independent(0.0);
  expect_gamma_independent(1.0);
}

// With the preset formula used down to x = 1/2, gamma = 5 makes phi(1/2) = 20.5 and the walk
// leaves {0,1} with probability about e^{-23} per visit to 1, so bridges of desk-scale length
// stay pinned. Kept as stated; this case is expected to fail.
TEST(DiagnosticProperty, GammaIndependentVerdictGammaFive) { expect_gamma_independent(5.0); }

TEST(DiagnosticProperty, GammaFiveWallTrap) {
  const WalkKernel k = kernel_from_phi(power_tail_coupling(0.5, 5.0, 10));
  auto phi = [](double x) { return 0.5 / (2 * x) + 5.0 / (x * x); };
  const double phi_half = phi(0.5), phi_3half = phi(1.5);
  EXPECT_NEAR(k.prob(1, 2), 1.0 / (1.0 + std::exp(phi_half + phi_3half)), 1e-20);
  EXPECT_LT(k.prob(1, 2), 2e-10);
}

// --- scans -----------------------------------------------------------------------------

TEST(Scan, EmptyGrid) {
  EXPECT_TRUE(phase_scan(PresetFamily::square_well, {}, ScanOptions{}).empty());
  EXPECT_TRUE(cartesian_grid({}).empty());
  EXPECT_TRUE(cartesian_grid({{1.0}, {}}).empty());
}

TEST(Scan, CartesianOrder) {
  const auto g = cartesian_grid({{1.0, 2.0}, {10.0, 20.0, 30.0}});
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0], (std::vector<double>{1.0, 10.0}));
  EXPECT_EQ(g[2], (std::vector<double>{1.0, 30.0}));
  EXPECT_EQ(g[3], (std::vector<double>{2.0, 10.0}));
}

TEST(Scan, WrongArityRejected) {
  EXPECT_THROW(phase_scan(PresetFamily::double_step, {{1.0}}, ScanOptions{}), std::invalid_argument);
}

TEST(Scan, RowsAgreeAwayFromTheBoundary) {
  ScanOptions opt;
  const auto rows = phase_scan(PresetFamily::square_well, {{-2.0}, {-1.5}, {0.0}, {0.5}}, opt);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_TRUE(r.agreement) << r.params[0] << " ratio " << r.growth_ratio;
  }
  EXPECT_EQ(rows[0].closed_form, Regime::partial_wetting);
  EXPECT_EQ(rows[3].closed_form, Regime::complete_wetting);
  EXPECT_NEAR(rows[2].boundary_distance, kLn2, 1e-15);
}

TEST(Scan, ErrorsAreReportedPerRow) {
  ScanOptions opt;
  opt.cutoff = 200;  // too small for N = 1600
  const auto rows = phase_scan(PresetFamily::square_well, {{0.0}}, opt);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_FALSE(rows[0].agreement);
}

TEST(ScanProperty, ResultIndependentOfJobCount) {
  ScanOptions one;
  one.lengths = {100, 400};
  one.cutoff = 600;
  ScanOptions four = one;
  four.jobs = 4;
  const auto grid = cartesian_grid({{-2.0, -1.0, 0.0}, {-0.5, 0.5}});
  const auto a = phase_scan(PresetFamily::double_step, grid, one);
  const auto b = phase_scan(PresetFamily::double_step, grid, four);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].index, i);
    EXPECT_EQ(b[i].index, i);
    EXPECT_EQ(a[i].params, b[i].params);
    EXPECT_EQ(a[i].growth_ratio, b[i].growth_ratio);
    EXPECT_EQ(a[i].numeric, b[i].numeric);
  }
}
