#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "unravel/gcm_kraus.hpp"
#include "unravel/sde_engine.hpp"
#include "unravel/spin_model.hpp"

using namespace unravel;

namespace {

std::vector<Complex> xi_sweep() {
  std::vector<Complex> out;
  for (int k = -8; k <= 8; ++k) out.push_back(std::polar(1.0, 0.18 * k));
  out.push_back(std::polar(1.0, std::numbers::pi / 4));
  return out;
}

StateVector tilted() { return StateVector{0.5, std::sqrt(3.0) / 2.0}; }

}  // namespace

TEST(GcmParams, IdentitiesAcrossXi) {
  for (Complex xi : xi_sweep()) {
    GcmParams gp = solve_gcm_params(xi, 0.7);
    EXPECT_EQ(gp.b, 1.0);
    EXPECT_DOUBLE_EQ(gp.a, xi.real());
    EXPECT_LT(std::abs(gp.alpha() - xi * xi.real()), 1e-10) << xi;
    EXPECT_LT(std::abs(gp.epsilon() - xi), 1e-10) << xi;
    EXPECT_LT(std::abs(gp.beta().imag()), 1e-10) << xi;
    EXPECT_NEAR(2.0 * gp.beta().real(), std::norm(xi), 1e-10) << xi;
    EXPECT_GT(gp.d.real(), 0.0);
  }
}

TEST(GcmParams, CollapseCaseIsReal) {
  GcmParams gp = solve_gcm_params(1.0, 2.0);
  EXPECT_EQ(gp.d, Complex(1.0, 0.0));
  EXPECT_EQ(gp.c.imag(), 0.0);
}

TEST(GcmParams, RejectsDegenerateXi) {
  EXPECT_THROW(solve_gcm_params(Complex(0.0, -1.0), 1.0), std::invalid_argument);
  EXPECT_THROW(solve_gcm_params(Complex(0.5, 0.0), 1.0), std::invalid_argument);
  EXPECT_THROW(solve_gcm_params(1.0, 0.0), std::invalid_argument);
}

TEST(KrausNorm, FirstMomentDiffersByInverseXiR) {
  for (Complex xi : xi_sweep()) {
    GcmParams gp = solve_gcm_params(xi, 1.0);
    double r = kraus_norm_squared(gp, 1e-3, KrausNormalization::first_moment) /
               kraus_norm_squared(gp, 1e-3, KrausNormalization::povm);
    EXPECT_NEAR(r, 1.0 / xi.real(), 1e-12 / xi.real()) << xi;
  }
  EXPECT_THROW(kraus_norm_squared(solve_gcm_params(1.0, 1.0), 0.0, KrausNormalization::povm), std::invalid_argument);
}

TEST(KrausOperator, CommutesWithL) {
  auto L = pauli(Axis::z);
  GcmParams gp = solve_gcm_params(std::polar(1.0, 0.5), 1.0);
  Matrix A = kraus_operator(L, gp, 3e-4, 1e-3).matrix;
  EXPECT_LT(max_abs_diff(commutator(A, L.matrix()), Matrix(2)), 1e-14);
  // Eigenstates keep their direction.
  auto r = kraus_apply(StateVector::basis(2, 1), L, gp, -0.01, 1e-3);
  EXPECT_EQ(r.state[0], Complex(0.0));
  EXPECT_GT(r.weight, 0.0);
  EXPECT_THROW(kraus_apply(StateVector(4), L, gp, 0.0, 1e-3), DimensionError);
}

TEST(KrausOperator, PovmIsComplete) {
  auto L = 0.5 * pauli(Axis::z) + 0.3 * pauli(Axis::x);
  for (Complex xi : {Complex(1.0), std::polar(1.0, 1.2), std::polar(1.0, -0.9)})
    for (double dt : {1e-2, 1e-3, 1e-5}) EXPECT_LT(povm_completeness(L, solve_gcm_params(xi, 1.5), dt), 1e-6);
}

TEST(KrausOperator, ChannelAverageIsExactDephasing) {
  auto L = pauli(Axis::z);
  const double gamma = 0.8, dt = 1e-2;
  auto rho = DensityMatrix::pure(tilted());
  for (Complex xi : {Complex(1.0), std::polar(1.0, 0.7)}) {
    Matrix ch = kraus_channel_average(rho, L, solve_gcm_params(xi, gamma), dt);
    EXPECT_NEAR(ch(0, 0).real(), 0.25, 1e-7);
    EXPECT_NEAR(ch(1, 1).real(), 0.75, 1e-7);
    EXPECT_LT(std::abs(ch(0, 1) - rho.matrix()(0, 1) * std::exp(-2.0 * gamma * dt)), 1e-7) << xi;
  }
}

TEST(RecordMean, MatchesGaussianIntegral) {
  auto L = pauli(Axis::z);
  GcmParams gp1 = solve_gcm_params(1.0, 1.0);
  auto up = record_mean_check(StateVector::basis(2, 0), L, gp1, 1e-3);
  EXPECT_NEAR(up.mean_povm, 1e-3, 1e-12);
  EXPECT_NEAR(up.total_povm, 1.0, 1e-9);
  const double r = 1.0 / std::sqrt(2.0);
  auto zero = record_mean_check(StateVector{r, r}, L, gp1, 1e-3);
  EXPECT_NEAR(zero.mean_povm, 0.0, 1e-15);
  for (Complex xi : xi_sweep()) {
    GcmParams gp = solve_gcm_params(xi, 1.0);
    auto st = record_mean_check(tilted(), L, gp, 1e-3);
    EXPECT_NEAR(st.mean_povm, st.gaussian_integral, 1e-12) << xi;
    EXPECT_NEAR(st.mean_povm, st.expected_xi_R, 1e-12) << xi;
    EXPECT_NEAR(st.mean_first_moment, st.expected_plain, 1e-12) << xi;
  }
  EXPECT_THROW(record_mean_check(StateVector{1.0, 1.0}, L, gp1, 1e-3), std::invalid_argument);
}

TEST(KrausSse, ZeroNoiseRecordGivesDriftOnly) {
  SpinParams sp{0.0, 1.0, 1.0};
  ModelSpec m = spin_model(sp);
  for (Complex xi : {Complex(1.0), std::polar(1.0, 0.6)}) {
    GcmParams gp = solve_gcm_params(xi, sp.lambda);
    UnravelingParams u{xi.real(), xi.imag(), sp.lambda};
    double e[2];
    for (int lev = 0; lev < 2; ++lev) {
      double dt = lev == 0 ? 1e-3 : 5e-4;
      double dy = xi.real() * expectation(tilted(), m.L) * dt;
      StateVector k = kraus_apply(tilted(), m.L, gp, dy, dt).state.normalized();
      StateVector s = sse_step(tilted(), m, u, 0.0, dt);
      // Remove the global phase before comparing.
      Complex ov = 0.0;
      for (std::size_t i = 0; i < 2; ++i) ov += std::conj(k[i]) * s[i];
      e[lev] = std::sqrt(std::max(0.0, 2.0 - 2.0 * std::abs(ov)));
    }
    EXPECT_LT(e[0], 1e-5);
    EXPECT_GT(e[0] / e[1], 3.0);
  }
}

TEST(Outcome, GridCoversEigenOutcomes) {
  auto L = pauli(Axis::z);
  GcmParams gp = solve_gcm_params(1.0, 1.0);
  auto g = outcome_grid(L, gp, 1e-3, 101);
  EXPECT_NEAR(g.front(), -1e-3 - 8.0 * outcome_sigma(gp, 1e-3), 1e-15);
  EXPECT_NEAR(g.back(), 1e-3 + 8.0 * outcome_sigma(gp, 1e-3), 1e-15);
  EXPECT_THROW(outcome_grid(L, gp, 1e-3, 2), std::invalid_argument);
}
