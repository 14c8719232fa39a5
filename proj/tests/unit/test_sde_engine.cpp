#include <gtest/gtest.h>

#include <cmath>

#include "unravel/sde_engine.hpp"
#include "unravel/spin_model.hpp"

using namespace unravel;

namespace {

const Complex I(0.0, 1.0);

ModelSpec driven_qubit(double omega) {
  return {omega * pauli(Axis::x), pauli(Axis::z), 1.0};
}

StateVector tilted() { return StateVector{0.5, std::sqrt(3.0) / 2.0}; }

double phase_distance(const StateVector& a, const StateVector& b) {
  Complex ov = inner(b, a);
  Complex ph = std::abs(ov) > 0 ? ov / std::abs(ov) : Complex(1.0);
  return std::sqrt((a - ph * b).norm2());
}

}  // namespace

TEST(UnravelingParams, Validation) {
  EXPECT_NO_THROW(UnravelingParams::nonlinear(1.0).validate());
  EXPECT_NO_THROW(UnravelingParams::linear(1.0).validate());
  EXPECT_NO_THROW((UnravelingParams{0.6, -0.8, 2.0}.validate()));
  EXPECT_THROW((UnravelingParams{0.6, 0.6, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((UnravelingParams{-1.0, 0.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((UnravelingParams{1.0, 0.0, -1.0}.validate()), std::invalid_argument);
  EXPECT_EQ(UnravelingParams::linear(1.0).xi(), -I);
}

TEST(StabilityBudget, SuggestsLargestStableStep) {
  ModelSpec m{pauli(Axis::z), 2.0 * pauli(Axis::z), 1.0};
  auto u = UnravelingParams::nonlinear(0.5);
  EXPECT_NEAR(max_stable_dt(m, u), 0.01 / (0.5 * 4.0), 1e-15);
  try {
    check_stability_budget(m, u, 0.02);
    FAIL() << "no StabilityError";
  } catch (const StabilityError& e) {
    EXPECT_NEAR(e.suggested_max_dt(), 0.005, 1e-15);
  }
  EXPECT_NO_THROW(check_stability_budget(m, u, 0.005));
  EXPECT_THROW(simulate_trajectory(m, u, tilted(), 0.02, 10, 1), StabilityError);
}

TEST(SseStep, NoNoiseNoCouplingIsUnitary) {
  ModelSpec m = driven_qubit(1.0);
  UnravelingParams u = UnravelingParams::nonlinear(0.0);
  const double dt = 1e-4;
  StateVector psi = StateVector::basis(2, 0);
  for (int k = 0; k < 10000; ++k) psi = sse_step(psi, m, u, 0.0, dt);
  StateVector exact{std::cos(1.0), -I * std::sin(1.0)};
  EXPECT_LT(phase_distance(psi, exact), 1e-3);
}

TEST(SseStep, RejectsBadInput) {
  ModelSpec m = driven_qubit(1.0);
  auto u = UnravelingParams::nonlinear(1.0);
  EXPECT_THROW(sse_step(StateVector{1.0, 1.0}, m, u, 0.0, 1e-3), std::invalid_argument);
  EXPECT_THROW(sse_step(StateVector{1.0, 0.0, 0.0, 0.0}, m, u, 0.0, 1e-3), DimensionError);
}

TEST(SseStep, NormPreservedAlongTrajectories) {
  ModelSpec m = driven_qubit(0.7);
  for (auto u : {UnravelingParams::nonlinear(1.0), UnravelingParams::linear(1.0), UnravelingParams{0.6, 0.8, 1.0}}) {
    auto tr = simulate_trajectory(m, u, tilted(), 1e-3, 2000, 77);
    for (const auto& s : tr.states) EXPECT_NEAR(s.norm2(), 1.0, 1e-12);
  }
}

TEST(SseStep, LinearUnravelingConvergesStronglyAtFirstOrder) {
  SpinParams sp{1.0, 1.0, 1.0};
  ModelSpec m = spin_model(sp);
  auto u = UnravelingParams::linear(sp.lambda);
  auto err = [&](double dt, Scheme scheme) {
    const std::size_t n = static_cast<std::size_t>(std::llround(1.0 / dt));
    double e2 = 0;
    for (std::uint64_t j = 0; j < 50; ++j) {
      auto fine = wiener_path(derive_seed(31, j), 1e-3 / 4.0, 4000);
      auto path = coarsen(fine, static_cast<std::size_t>(std::llround(dt / fine.dt)));
      TrajectoryOptions o;
      o.stride = n;
      o.scheme = scheme;
      auto tr = simulate_trajectory(m, u, tilted(), path, o);
      StateVector exact = spin_linear_solution(1.0, path.cumulative().back(), tilted(), sp);
      double d = phase_distance(tr.states.back(), exact);
      e2 += d * d;
    }
    return std::sqrt(e2 / 50.0);
  };
  double m1 = err(1e-3, Scheme::milstein), m2 = err(2e-3, Scheme::milstein);
  double e1 = err(1e-3, Scheme::euler_maruyama);
  EXPECT_LT(m1, e1);
  EXPECT_GT(m2 / m1, 1.6);
  EXPECT_LT(m2 / m1, 2.5);
}

TEST(Trajectory, SeedAndPathDriversAgree) {
  ModelSpec m = driven_qubit(1.0);
  auto u = UnravelingParams::nonlinear(1.0);
  auto a = simulate_trajectory(m, u, tilted(), 1e-3, 500, 12345);
  auto b = simulate_trajectory(m, u, tilted(), wiener_path(12345, 1e-3, 500));
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.states[k][i], b.states[k][i]);
  auto raw = wiener_path(1, 1e-3, 500);
  raw.tag = MeasureTag::raw;
  EXPECT_THROW(simulate_trajectory(m, u, tilted(), raw), std::invalid_argument);
}

TEST(Trajectory, StrideAndStorage) {
  ModelSpec m = driven_qubit(1.0);
  TrajectoryOptions o;
  o.stride = 10;
  o.observables = {pauli(Axis::z)};
  auto tr = simulate_trajectory(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 100, 3, o);
  ASSERT_EQ(tr.times.size(), 11u);
  EXPECT_NEAR(tr.times.back(), 0.1, 1e-15);
  ASSERT_EQ(tr.conditional_means.size(), 1u);
  EXPECT_NEAR(tr.conditional_means[0][4], expectation(tr.states[4], pauli(Axis::z)), 1e-15);
  EXPECT_EQ(tr.record.values.size(), 100u);
  EXPECT_EQ(tr.noise.size(), 100u);
  auto zero = simulate_trajectory(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 0, 3, o);
  EXPECT_EQ(zero.states.size(), 1u);
}

TEST(Trajectory, RecordOnlyWithRealPart) {
  ModelSpec m = driven_qubit(1.0);
  auto lin = simulate_trajectory(m, UnravelingParams::linear(1.0), tilted(), 1e-3, 100, 3);
  EXPECT_TRUE(lin.record.values.empty());
  auto nl = simulate_trajectory(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 100, 3);
  auto back = reconstruct_noise(nl.record,
                                [&] {
                                  std::vector<double> l;
                                  for (std::size_t k = 0; k < 100; ++k) l.push_back(expectation(nl.states[k], m.L));
                                  return l;
                                }(),
                                1.0, 1.0);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_NEAR(back.increments[k], nl.noise.increments[k], 1e-14);
}

TEST(Ensemble, IndependentOfThreadCount) {
  ModelSpec m = driven_qubit(1.0);
  TrajectoryOptions o;
  o.stride = 50;
  auto a = simulate_ensemble(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 200, 9, 17, o, 1);
  auto b = simulate_ensemble(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 200, 9, 17, o, 3);
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t k = 0; k < a[j].states.size(); ++k) EXPECT_EQ(a[j].states[k][1], b[j].states[k][1]);
}

TEST(Lindblad, DephasingClosedForm) {
  SpinParams sp{0.8, 0.3, 1.0};
  ModelSpec m = spin_model(sp);
  StateVector psi = tilted();
  std::vector<double> at{0.5, 1.0, 3.0};
  auto rho = lindblad_evolve(DensityMatrix::pure(psi), m, sp.lambda, 1e-3, at);
  for (std::size_t i = 0; i < at.size(); ++i) {
    double t = at[i];
    Complex exact = psi[0] * std::conj(psi[1]) * std::exp(-2.0 * sp.lambda * t) * std::exp(-2.0 * I * sp.nu * t);
    EXPECT_LT(std::abs(rho[i](0, 1) - exact), 1e-12);
    EXPECT_NEAR(rho[i](0, 0).real(), std::norm(psi[0]), 1e-14);
  }
}

TEST(Lindblad, StepKeepsTraceAndHermiticity) {
  ModelSpec m = driven_qubit(1.3);
  auto rho = DensityMatrix::pure(tilted());
  for (int k = 0; k < 1000; ++k) {
    rho = lindblad_step(rho, m, 0.7, 1e-2);
    EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-12);
    EXPECT_EQ(rho(0, 1), std::conj(rho(1, 0)));
  }
  EXPECT_GE(eigenvalues(rho.matrix()).front(), -1e-12);
}

// Non-commuting H and L: every unraveling averages to the same channel.
TEST(Ensemble, AverageMatchesLindbladForDrivenQubit) {
  ModelSpec m = driven_qubit(2.0);
  std::vector<double> at{0.5, 1.0};
  auto ref = lindblad_evolve(DensityMatrix::pure(tilted()), m, 1.0, 1e-4, at);
  TrajectoryOptions o;
  o.stride = 500;
  o.keep_noise = false;
  o.keep_record = false;
  const std::size_t N = 2000;
  for (auto u : {UnravelingParams::nonlinear(1.0), UnravelingParams::linear(1.0), UnravelingParams{0.6, 0.8, 1.0}}) {
    auto ens = simulate_ensemble(m, u, tilted(), 1e-3, 1000, 21, N, o);
    auto rho = ensemble_average(ens, at);
    for (std::size_t i = 0; i < at.size(); ++i) EXPECT_LT(max_abs_diff(rho[i].matrix(), ref[i].matrix()), 5.0 / std::sqrt(N));
  }
}

TEST(Ensemble, AverageRejectsUnknownTime) {
  ModelSpec m = driven_qubit(1.0);
  TrajectoryOptions o;
  o.stride = 10;
  auto ens = simulate_ensemble(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 100, 1, 3, o);
  std::vector<double> at{0.0155};
  EXPECT_ANY_THROW(ensemble_average(ens, at));
}

TEST(MomentFlow, ResidualShrinksLikeDt) {
  ModelSpec m = driven_qubit(1.0);
  for (auto u : {UnravelingParams::nonlinear(1.0), UnravelingParams{0.6, 0.8, 1.0}})
    for (int power : {1, 2}) {
      auto r1 = conditional_moment_flow_residual(simulate_trajectory(m, u, tilted(), 1e-3, 1000, 5), pauli(Axis::x), m,
                                                 u, power);
      auto r2 = conditional_moment_flow_residual(simulate_trajectory(m, u, tilted(), 2.5e-4, 4000, 5), pauli(Axis::x),
                                                 m, u, power);
      double a = rms(r1), b = rms(r2);
      EXPECT_LT(a, 10.0 * 1e-3);
      EXPECT_GT(a / b, 3.0);
    }
}

TEST(MomentFlow, NeedsDenseStorage) {
  ModelSpec m = driven_qubit(1.0);
  TrajectoryOptions o;
  o.stride = 2;
  auto tr = simulate_trajectory(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 10, 5, o);
  EXPECT_THROW(conditional_moment_flow_residual(tr, pauli(Axis::z), m, UnravelingParams::nonlinear(1.0), 1),
               std::invalid_argument);
  EXPECT_THROW(conditional_moment_flow_residual(tr, pauli(Axis::z), m, UnravelingParams::nonlinear(1.0), 3),
               std::invalid_argument);
}
