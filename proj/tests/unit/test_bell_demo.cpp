#include <gtest/gtest.h>

#include <cmath>

#include "unravel/bell_demo.hpp"

using namespace unravel;

TEST(Bell, SingletIsNormalizedAndAntisymmetric) {
  StateVector s = singlet();
  EXPECT_NEAR(s.norm2(), 1.0, 1e-15);
  EXPECT_EQ(s[0], Complex(0.0));
  EXPECT_EQ(s[1], -s[2]);
  // Bob alone sees I/2.
  auto bob = partial_trace(DensityMatrix::pure(s), Subsystem::first);
  EXPECT_LT(max_abs_diff(bob.matrix(), DensityMatrix::maximally_mixed(2).matrix()), 1e-15);
}

TEST(Bell, ExactOutcomesAreEquiprobableAndMixed) {
  for (Basis b : {Basis::z, Basis::x}) {
    BellOutcome o = alice_measures(b);
    ASSERT_EQ(o.bob_states.size(), 2u);
    EXPECT_EQ(o.bob_states[0].second, 0.5);
    EXPECT_EQ(o.bob_states[1].second, 0.5);
    EXPECT_LT(max_abs_diff(o.bob_rho.matrix(), DensityMatrix::maximally_mixed(2).matrix()), 1e-15);
  }
  // Perfect anticorrelation in z.
  BellOutcome z = alice_measures(Basis::z);
  EXPECT_NEAR(std::abs(z.bob_states[0].first[1]), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(z.bob_states[1].first[0]), 1.0, 1e-15);
}

TEST(Bell, SpreadGapWithoutSignal) {
  BellOutcome z = alice_measures(Basis::z), x = alice_measures(Basis::x);
  EXPECT_NEAR(z.mean_sigma, 0.0, 1e-15);
  EXPECT_NEAR(x.mean_sigma, 1.0, 1e-15);
  SignalingGap g = signaling_gap(z, x);
  EXPECT_LE(g.rho_distance, 1e-15);
  EXPECT_NEAR(g.sigma_gap, 1.0, 1e-15);
}

TEST(Bell, ProjectiveAnalogue) {
  EXPECT_NEAR(projective_analogue(Axis::z), 0.0, 1e-15);
  EXPECT_NEAR(projective_analogue(Axis::x), 1.0, 1e-15);
  EXPECT_THROW(projective_analogue(Axis::y), std::invalid_argument);
}

TEST(Bell, SampledFrequenciesConverge) {
  EXPECT_THROW(alice_measures_sampled(Basis::z, 0, 1), std::invalid_argument);
  for (std::size_t n : {100u, 10000u, 1000000u}) {
    BellOutcome o = alice_measures_sampled(Basis::x, n, 3);
    double p = o.bob_states[0].second;
    EXPECT_LT(std::abs(p - 0.5), 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(o.bob_states[0].second + o.bob_states[1].second, 1.0, 1e-15);
    EXPECT_NEAR(o.mean_sigma, 1.0, 1e-15);
    EXPECT_NEAR(signaling_gap(o, alice_measures(Basis::x)).rho_distance, std::abs(p - 0.5), 1e-12);
  }
}

TEST(Bell, DynamicalEnsemblesAgreeOnRhoOnly) {
  DynamicalAnalogueOptions o;
  o.n_trajectories = 400;
  o.t_final = 3.0;
  DynamicalAnalogue d = dynamical_analogue(o);
  EXPECT_DOUBLE_EQ(d.tolerance, 5.0 / 20.0);
  EXPECT_LT(d.rho_distance, d.tolerance);
  EXPECT_LT(max_abs_diff(d.rho_nonlinear.matrix(), d.rho_lindblad.matrix()), d.tolerance);
  // Collapse drives the spread to zero while the linear one stays at 1.
  EXPECT_LT(d.mean_sigma_nonlinear, 1.0 / (1.0 + 4.0 * o.lambda * o.t_final) + 0.02);
  EXPECT_NEAR(d.mean_sigma_linear, 1.0, 1e-9);
}
