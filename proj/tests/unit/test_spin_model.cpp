#include <gtest/gtest.h>

#include <cmath>

#include "unravel/spin_model.hpp"

using namespace unravel;

namespace {

const Complex I(0.0, 1.0);
StateVector tilted() { return StateVector{0.5, std::sqrt(3.0) / 2.0}; }
double sz(const StateVector& s) { return expectation(s, pauli(Axis::z)); }

}  // namespace

TEST(SpinModel, OperatorsAndValidation) {
  SpinParams sp{2.0, 0.5, 1.5};
  ModelSpec m = spin_model(sp);
  EXPECT_EQ(m.H.matrix()(0, 0), Complex(3.0));
  EXPECT_EQ(m.H.matrix()(1, 1), Complex(-3.0));
  EXPECT_EQ(m.L.matrix()(1, 1), Complex(-1.0));
  EXPECT_THROW((SpinParams{1.0, -1.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((SpinParams{1.0, 1.0, 0.0}.validate()), std::invalid_argument);
}

TEST(SpinClosedForms, LinearIsUnitaryAndKeepsPopulations) {
  SpinParams sp;
  for (double W : {-2.0, 0.0, 0.7, 5.0}) {
    StateVector s = spin_linear_solution(1.3, W, tilted(), sp);
    EXPECT_NEAR(s.norm2(), 1.0, 1e-15);
    EXPECT_NEAR(sz(s), -0.5, 1e-15);
    Complex phase = std::exp(-I * (sp.nu * 1.3 + std::sqrt(sp.lambda) * W));
    EXPECT_LT(std::abs(s[0] - phase * 0.5), 1e-15);
  }
}

TEST(SpinClosedForms, NonlinearReducesToRotationWithoutNoise) {
  SpinParams sp{1.5, 1.0, 1.0};
  StateVector s = spin_nonlinear_closed_form(0.4, 0.0, 0.0, tilted(), sp);
  EXPECT_LT(std::abs(s[0] - std::exp(-I * 0.6) * 0.5), 1e-15);
  // Huge arguments stay finite and collapse.
  StateVector up = spin_nonlinear_closed_form(1.0, 800.0, 0.0, tilted(), sp);
  EXPECT_TRUE(up.is_finite());
  EXPECT_NEAR(sz(up), 1.0, 1e-12);
  StateVector down = spin_nonlinear_closed_form(1.0, -800.0, 0.0, tilted(), sp);
  EXPECT_NEAR(sz(down), -1.0, 1e-12);
}

TEST(SpinRoutes, DirectAndGirsanovAgreeAtSmallStep) {
  SpinParams sp;
  auto path = wiener_path(71, 1e-4, 10000);
  auto d = spin_nonlinear_trajectory(tilted(), sp, path, NonlinearRoute::direct, 1000);
  auto g = spin_nonlinear_trajectory(tilted(), sp, path, NonlinearRoute::girsanov, 1000);
  ASSERT_EQ(d.states.size(), g.states.size());
  for (std::size_t k = 0; k < d.states.size(); ++k) EXPECT_NEAR(sz(d.states[k]), sz(g.states[k]), 2e-2);
}

TEST(SpinRoutes, GirsanovRawNoiseShiftsBackToPhysical) {
  SpinParams sp{1.0, 2.0, 1.0};
  auto path = wiener_path(5, 1e-3, 500);
  auto g = spin_girsanov_trajectory(tilted(), sp, path);
  EXPECT_EQ(g.raw_noise.tag, MeasureTag::raw);
  ASSERT_EQ(g.drift.size(), 500u);
  ASSERT_EQ(g.sigma_z_integral.size(), 501u);
  auto back = girsanov_shift(g.raw_noise, g.drift, ShiftDirection::raw_to_physical);
  for (std::size_t k = 0; k < 500; ++k) EXPECT_NEAR(back.increments[k], path.increments[k], 1e-14);
  // I_t is the trapezoid integral of the stored <sigma_z>.
  double I_t = 0.0;
  for (std::size_t k = 0; k < 500; ++k) I_t += 0.5e-3 * (sz(g.record.states[k]) + sz(g.record.states[k + 1]));
  EXPECT_NEAR(g.sigma_z_integral.back(), I_t, 1e-10);
}

TEST(SpinFlows, MomentAndVarianceResidualsShrink) {
  SpinParams sp{1.0, 1.0, 1.0};
  auto t1 = spin_nonlinear_trajectory(tilted(), sp, 1e-3, 1000, 8);
  auto t2 = spin_nonlinear_trajectory(tilted(), sp, 2.5e-4, 4000, 8);
  for (int n : {1, 2, 3}) {
    double a = rms(moment_flow_residual(t1, n, sp)), b = rms(moment_flow_residual(t2, n, sp));
    if (n % 2 == 0) {
      EXPECT_LT(a, 1e-12);
      continue;
    }
    EXPECT_GT(a / b, 3.0);
  }
  double a = rms(variance_flow_residual(t1, sp)), b = rms(variance_flow_residual(t2, sp));
  EXPECT_GT(a / b, 3.0);
  EXPECT_LT(a, 1e-2);
}

// <sigma_z> has no drift under either unraveling: its ensemble mean is conserved.
TEST(SpinEnsemble, SigmaZIsAMartingale) {
  SpinParams sp{1.0, 1.0, 1.0};
  ModelSpec m = spin_model(sp);
  TrajectoryOptions o;
  o.stride = 1000;
  o.keep_noise = false;
  o.keep_record = false;
  const std::size_t N = 3000;
  auto ens = simulate_ensemble(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 2000, 404, N, o);
  double s1 = 0, s2 = 0;
  for (const auto& tr : ens) {
    double v = sz(tr.states.back());
    s1 += v;
    s2 += v * v;
  }
  double mean = s1 / N, se = std::sqrt((s2 / N - mean * mean) / N);
  EXPECT_LT(std::abs(mean + 0.5), 4.0 * se);
}

TEST(SpinEnsemble, CollapseStatisticsAndBound) {
  SpinParams sp;
  ModelSpec m = spin_model(sp);
  TrajectoryOptions o;
  o.stride = 500;
  auto ens = simulate_ensemble(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 8000, 1, 400, o);
  CollapseReport c = collapse_statistics(ens, tilted());
  EXPECT_EQ(c.total(), 400u);
  EXPECT_DOUBLE_EQ(c.born_p_up, 0.25);
  EXPECT_LT(std::abs(c.fraction_up() - 0.25), 3.0 * std::sqrt(0.25 * 0.75 / 400) + 0.01);
  EXPECT_NEAR(collapse_bound(0.75, 1.0, 0.0), 0.75, 0.0);
  EXPECT_NEAR(collapse_bound(0.75, 2.0, 1.0), 0.75 / 7.0, 1e-16);
  auto rep = supermartingale_check(ens, sp);
  EXPECT_NEAR(rep.rows.front().mean_sigma, 0.75, 1e-12);
  EXPECT_TRUE(rep.all_below_bound());
  EXPECT_TRUE(rep.all_non_increasing());
}

TEST(SpinEnsemble, LinearUnravelingDoesNotCollapse) {
  SpinParams sp;
  ModelSpec m = spin_model(sp);
  TrajectoryOptions o;
  o.stride = 1000;
  auto ens = simulate_ensemble(m, UnravelingParams::linear(1.0), tilted(), 1e-3, 5000, 2, 50, o);
  for (const auto& tr : ens) EXPECT_NEAR(sz(tr.states.back()), -0.5, 1e-9);
  CollapseReport c = collapse_statistics(ens, tilted());
  EXPECT_EQ(c.n_unresolved, 50u);
}
