#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "walkline/bridge_engine.hpp"
#include "walkline/rw_to_sos.hpp"
#include "walkline/sos_to_rw.hpp"

using namespace walkline;

namespace {

// dense symmetric transfer matrix e^{-W - step - V(x)/2 - V(y)/2}, built without the banded helpers
Eigen::MatrixXd dense_kernel(const SosModel& m) {
  const auto n = static_cast<Eigen::Index>(m.states());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      const Energy e = m.edge_energy(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      if (!e.is_forbidden()) K(x, y) = std::exp(-e.value() - 0.5 * m.V[x] - 0.5 * m.V[y]);
    }
  return K;
}

double eigen_rho(const SosModel& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_kernel(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

// --- presets -----------------------------------------------------------------------

TEST(Presets, SquareAndDoubleStep) {
  const SosModel s = square_well_model(-1.5, 10);
  EXPECT_EQ(s.V[0], -1.5);
  EXPECT_EQ(s.V[1], 0.0);
  EXPECT_EQ(s.W(3, 4).value(), kLn2);
  EXPECT_TRUE(s.W(3, 3).is_forbidden());
  const SosModel d = double_step_model(-2.0, 0.5, 10);
  EXPECT_EQ(d.V[1], 0.5);
  EXPECT_EQ(d.V[2], 0.0);
  EXPECT_THROW(nearest_neighbor_sos({1.0}), std::invalid_argument);
}

// --- continued fraction ------------------------------------------------------------

TEST(ContinuedFractionTest, FirstAnsatzClosedForm) {
  for (double v0 : {-0.6, -0.3, 0.0, 0.5, 1.0}) {
    const SosModel m = square_well_model(v0, 400);
    const auto cf = continued_fraction_invert(m.V, 0.0);
    ASSERT_TRUE(cf.ok());
    const auto sw = square_well_analysis(v0);
    ASSERT_TRUE(sw.first_two_b0.has_value());
    for (std::size_t x = 0; x < 400; ++x) ASSERT_NEAR(cf.a[x], sw.first_ansatz_a(x), 1e-13) << v0 << " " << x;
  }
}

TEST(ContinuedFractionTest, FreeWalkIsAllOnesAboveTheWall) {
  const auto cf = continued_fraction_invert(std::vector<double>(20, 0.0), 0.0);
  ASSERT_TRUE(cf.ok());
  EXPECT_EQ(cf.a[0], 2.0);
  // a_X = (X+2)/(X+1)
  for (std::size_t x = 0; x < 19; ++x) EXPECT_NEAR(cf.a[x], (x + 2.0) / (x + 1.0), 1e-14);
}

TEST(ContinuedFractionTest, PositivityFailure) {
  const auto cf = continued_fraction_invert(square_well_model(-2.0, 50).V, 0.0);
  EXPECT_FALSE(cf.ok());
  EXPECT_EQ(*cf.failed_at, 1u);
  EXPECT_THROW(cf.coupling(), PositivityFailure);
  try {
    cf.coupling();
  } catch (const PositivityFailure& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(ContinuedFractionTest, CouplingRebuildsTheSosPotential) {
  // phi = -ln a fed back into the +-1 translation returns V + lambda, except at the top
  const SosModel m = square_well_model(-0.4, 60);
  const auto cf = continued_fraction_invert(m.V, 0.0);
  const SosModel back = sos_from_phi(cf.coupling());
  for (std::size_t x = 0; x < 60; ++x) EXPECT_NEAR(back.V[x], m.V[x], 1e-13) << x;
}

TEST(ContinuedFractionTest, ResidualOfExactSolution) {
  const auto sw = square_well_analysis(-1.0);
  const double lambda = std::log(*sw.second_rho);
  std::vector<double> a(100, *sw.second_a);
  const SosModel m = square_well_model(-1.0, 100);
  EXPECT_LT(continued_fraction_residual(m.V, lambda, a), 1e-15);
}

// The forward recursion multiplies a perturbation at X by about a^{-2} per step, so even
// the exact lambda loses the localised solution after a few dozen edges.
TEST(ContinuedFractionTest, ForwardRecursionIsIllConditioned) {
  const auto sw = square_well_analysis(-1.0);
  const auto cf = continued_fraction_invert(square_well_model(-1.0, 400).V, std::log(*sw.second_rho));
  EXPECT_NEAR(cf.a[0], *sw.second_a, 1e-15);
  EXPECT_NEAR(cf.a[10], *sw.second_a, 1e-10);
  bool drifted = !cf.ok();
  for (std::size_t x = 0; x < cf.a.size() && !drifted; ++x) drifted = std::abs(cf.a[x] - *sw.second_a) > 1e-2;
  EXPECT_TRUE(drifted);
}

// --- closed forms ------------------------------------------------------------------

TEST(SquareWell, SecondAnsatzValues) {
  struct Case {
    double v0, a, rho;
  };
  for (const Case c : {Case{-1.0, 0.76287397836689017871, 1.0368532363994881773},
                       Case{-1.5, 0.53592622327039404196, 1.200927348669241218},
                       Case{-2.0, 0.39562310694607519577, 1.4616406656288949084}}) {
    const auto sw = square_well_analysis(c.v0);
    EXPECT_NEAR(*sw.second_a, c.a, 1e-15);
    EXPECT_NEAR(*sw.second_rho, c.rho, 1e-15);
    EXPECT_EQ(sw.regime, Regime::partial_wetting);
  }
}

TEST(SquareWell, RegimeBoundary) {
  EXPECT_EQ(square_well_analysis(-0.5).regime, Regime::complete_wetting);
  EXPECT_EQ(square_well_analysis(-0.7).regime, Regime::partial_wetting);
  EXPECT_TRUE(square_well_analysis(-kLn2).on_boundary);
  EXPECT_EQ(square_well_analysis(-kLn2).regime, Regime::complete_wetting);
  EXPECT_FALSE(square_well_analysis(0.2).second_a.has_value());
}

TEST(DoubleStep, RootsSolveTheQuartic) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(-3.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double v0 = u(gen), v1 = u(gen);
    const auto d = double_step_analysis(v0, v1);
    for (double a : d.roots) {
      const double a2 = a * a;
      const double poly = a2 * a2 * std::expm1(v1) + a2 * (2 * std::exp(v1) - std::exp(-v0) - 1) + std::exp(v1);
      const double scale = a2 * a2 * std::abs(std::expm1(v1)) + a2 * std::abs(2 * std::exp(v1) - std::exp(-v0) - 1) +
                           std::exp(v1);
      ASSERT_LT(std::abs(poly) / scale, 1e-13) << v0 << " " << v1;
    }
  }
}

TEST(DoubleStep, PaperValues) {
  const auto d = double_step_analysis(-2.0, 0.5);
  ASSERT_EQ(d.roots.size(), 2u);
  EXPECT_NEAR(d.roots[0], 0.58172292663983087512, 1e-14);
  EXPECT_NEAR(d.roots[1], 2.7404909425354479998, 1e-13);
  EXPECT_NEAR(d.rho[0], 1.1503771830941354153, 1e-14);
  EXPECT_NEAR(d.rho[1], 1.5526945325798587856, 1e-14);
  const auto e = double_step_analysis(-2.0, -0.5);
  ASSERT_EQ(e.roots.size(), 1u);
  EXPECT_NEAR(e.roots[0] * e.roots[0], 0.084134045624477996233, 1e-15);
}

TEST(DoubleStep, RegimeMatchesSquareWellWhenV1Vanishes) {
  for (int i = 0; i < 100; ++i) {
    const double v0 = -3.0 + 4.0 * i / 99.0;
    if (std::abs(v0 + kLn2) < 1e-9) continue;
    EXPECT_EQ(double_step_analysis(v0, 0.0).regime, square_well_analysis(v0).regime) << v0;
  }
}

TEST(DoubleStep, FirstAnsatzValidityCondition) {
  EXPECT_TRUE(double_step_analysis(0.0, 0.0).first_ansatz_valid);
  EXPECT_FALSE(double_step_analysis(-3.0, 0.1).first_ansatz_valid);
  EXPECT_EQ(double_step_analysis(-3.0, 0.1).regime, Regime::partial_wetting);
  EXPECT_FALSE(double_step_analysis(0.0, -0.5).validity_window.has_value());
  EXPECT_TRUE(*double_step_analysis(-2.0, 0.5).validity_window);
  EXPECT_FALSE(*double_step_analysis(-0.5, 1.0).validity_window);
}

// --- Perron ground state ---------------------------------------------------------------

TEST(Perron, MatchesDenseEigenSolver) {
  std::mt19937_64 gen(41);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<double> V(60 + trial * 10);
    for (double& v : V) v = n(gen);
    const SosModel m = nearest_neighbor_sos(V);
    const GroundState g = perron_ground_state(m);
    EXPECT_NEAR(g.rho, eigen_rho(m), 1e-12 * g.rho);
    EXPECT_LT(g.scaled_residual, 1e-13);
    EXPECT_GE(g.residual, g.scaled_residual);
  }
}

TEST(Perron, WideBandMatchesDenseEigenSolver) {
  const SosModel m = sos_from_general(geometric_steps(1.0, 3), log_potential(1.0, 80));
  const GroundState g = perron_ground_state(m);
  EXPECT_NEAR(g.rho, eigen_rho(m), 1e-9);
  EXPECT_LT(g.residual, 1e-10);
}

TEST(Perron, SquareWellClosedFormRho) {
  for (double v0 : {-1.0, -1.5, -2.0}) {
    const GroundState g = perron_ground_state(square_well_model(v0, 2000));
    EXPECT_LT(g.residual, 1e-10);
    EXPECT_EQ(g.U[0], 0.0);
    EXPECT_NEAR(g.rho, *square_well_analysis(v0).second_rho, 1e-12) << v0;
  }
}

TEST(Perron, DoubleStepSelectsAClosedFormRoot) {
  const auto d = double_step_analysis(-2.0, 0.5);
  const GroundState g = perron_ground_state(double_step_model(-2.0, 0.5, 1000));
  double best = 1.0;
  for (double r : d.rho) best = std::min(best, std::abs(g.rho - r));
  EXPECT_LT(best, 1e-10);
}

TEST(Perron, FlatPotentialLargeCutoff) {
  const GroundState g = perron_ground_state(nearest_neighbor_sos(std::vector<double>(2001, 0.0)));
  EXPECT_LT(g.residual, 1e-10);
  EXPECT_NEAR(g.rho, std::cos(M_PI / 2002.0 * 1.0), 1e-5);  // approaches 1 from below
  EXPECT_LT(g.rho, 1.0);
}

TEST(Perron, ReducibleModelRejected) {
  SosModel m = square_well_model(-1.0, 10);
  m.W.set(4, 5, Energy::forbidden());
  EXPECT_THROW(perron_ground_state(m), std::invalid_argument);
}

TEST(RhoTrendTest, ConvergesForPartialWetting) {
  const std::vector<std::size_t> cutoffs{100, 200, 400};
  const RhoTrend t = rho_trend([](std::size_t M) { return square_well_model(-1.0, M); }, cutoffs);
  ASSERT_EQ(t.rho.size(), 3u);
  EXPECT_LT(t.last_change(), 1e-12);
  const RhoTrend f = rho_trend([](std::size_t M) { return square_well_model(-0.2, M); }, cutoffs);
  EXPECT_GT(f.last_change(), 1e-6);  // delocalised ground state still moving with M
  EXPECT_GT(f.rho.back(), f.rho.front());
}

// --- kernel_from_sos -------------------------------------------------------------------

TEST(KernelFromSos, SquareWellBulkRatio) {
  const SosModel m = square_well_model(-1.0, 2000);
  const WalkKernel k = kernel_from_sos(m, perron_ground_state(m));
  EXPECT_TRUE(validate_kernel(k).empty());
  for (std::size_t x : {1u, 5u, 20u, 100u}) EXPECT_NEAR(k.prob(x, x - 1) / k.prob(x, x + 1), M_E - 1.0, 1e-9) << x;
  EXPECT_EQ(k.structure(), Structure::nearest_neighbor);
  EXPECT_EQ(k.wall_mode(), WallMode::reflect);
}

TEST(KernelFromSos, GroundStateCouplingMatchesSecondAnsatz) {
  const SosModel m = square_well_model(-1.5, 1000);
  const GroundState g = perron_ground_state(m);
  const auto a = ground_state_coupling(m, g);
  const double expect = *square_well_analysis(-1.5).second_a;
  for (std::size_t x = 0; x < 200; ++x) ASSERT_NEAR(a[x], expect, 1e-9) << x;
  EXPECT_LT(continued_fraction_residual(m.V, std::log(g.rho), a), 1e-10);
}

// The Doob transform leaves every bridge law unchanged.
TEST(KernelFromSosProperty, PreservesBridgeLaw) {
  std::mt19937_64 gen(43);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> V(8);
    for (double& v : V) v = n(gen);
    const SosModel m = nearest_neighbor_sos(V);
    const WalkKernel k = kernel_from_sos(m, perron_ground_state(m));
    ASSERT_TRUE(validate_kernel(k).empty());
    const auto paths = enumerate_bridges(10, std::vector<int>{-1, 1}, 7);
    const auto p = bridge_probabilities(TransferMatrix(m), paths);
    const auto q = bridge_probabilities(TransferMatrix(k), paths);
    for (std::size_t i = 0; i < p.size(); ++i) ASSERT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(KernelFromSosProperty, MetropolisRoundTrip) {
  // SOS model of a Metropolis walk maps back to the same walk
  const auto U = log_potential(1.0, 300);
  const WalkKernel orig = metropolis_full_kernel(U);
  const SosModel m = sos_from_metropolis(U, WallMode::metropolis_wall);
  const WalkKernel back = kernel_from_sos(m, perron_ground_state(m));
  EXPECT_EQ(back.structure(), Structure::lazy_nearest_neighbor);
  for (std::size_t x = 0; x < 150; ++x)
    for (std::size_t y = (x ? x - 1 : 0); y <= x + 1; ++y) ASSERT_NEAR(back.prob(x, y), orig.prob(x, y), 1e-8);
}

TEST(KernelFromSos, MismatchedGroundStateThrows) {
  const SosModel m = square_well_model(-1.0, 100);
  GroundState g = perron_ground_state(m);
  g.rho *= 1.01;
  EXPECT_THROW(kernel_from_sos(m, g), GroundStateMismatch);
}
