#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <utility>

#include "unravel/gaussian_dynamics.hpp"
#include "unravel/sde_engine.hpp"

using namespace unravel;

namespace {

const Complex I(0.0, 1.0);

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
double rel(Complex a, Complex b) { return std::abs(a - b) / std::abs(b); }

struct Case {
  const char* name;
  MechanicalParams p;
  Complex a0;
};

std::vector<Case> cases() {
  MechanicalParams h = presets::harmonic();
  return {{"free", presets::fig1(), presets::kFig1A0},
          {"free_chirped", presets::fig1(), Complex(presets::kFig1A0, -0.4 * presets::kFig1A0)},
          {"harmonic", h, presets::harmonic_a0()},
          {"harmonic_chirped", h, Complex(presets::harmonic_a0(), 0.3 * presets::harmonic_a0())}};
}

}  // namespace

TEST(SpreadConstants, Validation) {
  auto p = presets::fig1();
  EXPECT_THROW(spread_constants(p, Complex(0.0, 1.0), Unraveling::nonlinear), std::invalid_argument);
  EXPECT_THROW(spread_constants(p, Complex(-1.0, 0.0), Unraveling::linear), std::invalid_argument);
  auto h = presets::harmonic();
  Complex ground = h.m * h.omega / (2.0 * h.hbar);
  EXPECT_THROW(spread_constants(h, ground, Unraveling::linear), std::domain_error);
  EXPECT_EQ(spread_constants(p, presets::kFig1A0, Unraveling::linear).profile, SpreadProfile::ballistic);
}

TEST(SpreadConstants, FreeCollapseOracle) {
  auto p = presets::fig1();
  auto sc = spread_constants(p, presets::kFig1A0, Unraveling::nonlinear);
  // c^2 = lambda m / (2 i hbar), b = 2 i hbar c / m.
  Complex c2 = p.lambda * p.m / (2.0 * I * p.hbar);
  EXPECT_LT(rel(sc.c * sc.c, c2), 1e-14);
  EXPECT_LT(rel(sc.b, 2.0 * I * p.hbar * sc.c / p.m), 1e-14);
  EXPECT_GT(sc.b.real(), 0.0);
  EXPECT_GT(sc.c.real(), 0.0);
}

TEST(Width, InitialValueIsExact) {
  for (const auto& c : cases())
    for (auto u : {Unraveling::nonlinear, Unraveling::linear}) {
      auto sc = spread_constants(c.p, c.a0, u);
      EXPECT_EQ(a_closed_form(0.0, sc), c.a0) << c.name;
      EXPECT_EQ(sigma_x(0.0, c.p, c.a0, u), 1.0 / (4.0 * c.a0.real())) << c.name;
    }
}

TEST(Width, ClosedFormSolvesTheWidthEquation) {
  for (const auto& c : cases())
    for (auto u : {Unraveling::nonlinear, Unraveling::linear}) {
      auto sc = spread_constants(c.p, c.a0, u);
      double rate = gaussian_stiffness(c.p, c.a0);
      double h = 1e-4 / rate;
      for (double t : {0.5 / rate, 3.0 / rate, 40.0 / rate}) {
        Complex d = (a_closed_form(t + h, sc) - a_closed_form(t - h, sc)) / (2.0 * h);
        Complex rhs = a_rhs(a_closed_form(t, sc), c.p, u);
        EXPECT_LT(std::abs(d - rhs), 1e-6 * std::max(std::abs(rhs), rate * std::abs(a_closed_form(t, sc))))
            << c.name << " t=" << t;
      }
    }
}

TEST(Width, FreeLinearIsBallistic) {
  auto p = presets::fig1();
  Complex a0(presets::kFig1A0, 1e8);
  auto sc = spread_constants(p, a0, Unraveling::linear);
  for (double t : {0.0, 1e-3, 1.0, 1e4}) {
    Complex exact = a0 / (1.0 + 2.0 * I * p.hbar * a0 * t / p.m);
    EXPECT_LT(rel(a_closed_form(t, sc), exact), 1e-14);
  }
}

TEST(Spread, PrintedFreeFormulasAgree) {
  auto p = presets::fig1();
  Complex a0 = presets::kFig1A0;
  double bR = spread_constants(p, a0, Unraveling::nonlinear).b.real();
  for (int i = 0; i <= 50; ++i) {
    double t = i * 0.2 / bR;
    EXPECT_LT(rel(sigma_x_free_nonlinear_literal(t, p, a0), sigma_x(t, p, a0, Unraveling::nonlinear)), 1e-10);
    EXPECT_LT(rel(sigma_x_free_linear_literal(t, p, a0), sigma_x(t, p, a0, Unraveling::linear)), 1e-12);
  }
}

TEST(Spread, HarmonicLiteralVarianceAgrees) {
  auto p = presets::harmonic();
  for (Complex a0 : {Complex(presets::harmonic_a0()), Complex(presets::harmonic_a0(), 0.3 * presets::harmonic_a0()),
                     Complex(3.0 * presets::harmonic_a0())})
    for (int i = 0; i <= 100; ++i) {
      double t = i * 1e-5;
      EXPECT_LT(rel(var_x_harmonic_literal(t, p, a0), var_x(t, p, a0)), 1e-9) << "t=" << t;
    }
}

TEST(Covariance, PureGaussianDeterminant) {
  const double hbar = 1.3;
  for (Complex a : {Complex(1.0, 0.0), Complex(2.0, -5.0), Complex(0.1, 1.0)}) {
    CovarianceMatrix s = covariance_from_width(a, hbar);
    EXPECT_NEAR(s.det() / (hbar * hbar / 4.0), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(s.sxx, 1.0 / (4.0 * a.real()));
  }
}

TEST(Covariance, VarianceExceedsBothConditionalSpreads) {
  for (const auto& c : cases()) {
    double rate = gaussian_stiffness(c.p, c.a0);
    for (int i = 1; i <= 50; ++i) {
      double t = i * 0.3 / rate;
      double v = var_x(t, c.p, c.a0);
      EXPECT_GE(v * (1 + 1e-12), sigma_x(t, c.p, c.a0, Unraveling::nonlinear)) << c.name;
      EXPECT_GE(v * (1 + 1e-12), sigma_x(t, c.p, c.a0, Unraveling::linear)) << c.name;
    }
  }
}

TEST(Covariance, FreeVarianceIsBallisticPlusHeating) {
  auto p = presets::fig1();
  Complex a0(presets::kFig1A0, 2e8);
  for (double t : {1.0, 10.0, 100.0}) {
    auto v = var_matrix(t, p, a0), b = sigma_matrix(t, p, a0, Unraveling::linear);
    double l = p.lambda * p.hbar * p.hbar;
    EXPECT_LT(rel(v.sxp - b.sxp, l * t * t / (2.0 * p.m)), 1e-8);
    EXPECT_LT(rel(v.spp - b.spp, l * t), 1e-8);
  }
}

TEST(MeanSquare, VarianceDecomposesForBothUnravelings) {
  for (const auto& c : cases()) {
    double rate = gaussian_stiffness(c.p, c.a0);
    for (double t : {0.7 / rate, 5.0 / rate, 30.0 / rate})
      for (auto u : {Unraveling::nonlinear, Unraveling::linear}) {
        double noise = mean_square_x(t, c.p, c.a0, 0.0, 0.0, u);
        EXPECT_LT(rel(noise + sigma_x(t, c.p, c.a0, u), var_x(t, c.p, c.a0)), 1e-6) << c.name;
      }
  }
}

TEST(MeanSquare, InitialOffsetOnlyAddsTheBallisticMean) {
  for (const auto& c : cases()) {
    double rate = gaussian_stiffness(c.p, c.a0);
    const double x0 = 2e-6, k0 = 3e5, t = 5.0 / rate;
    double mean = ballistic_mean(t, c.p, x0, k0);
    for (auto u : {Unraveling::nonlinear, Unraveling::linear}) {
      double with = mean_square_x(t, c.p, c.a0, x0, k0, u);
      double without = mean_square_x(t, c.p, c.a0, 0.0, 0.0, u);
      EXPECT_LT(std::abs(with - mean * mean - without), 1e-14 * with) << c.name;
    }
  }
  auto p = presets::fig1();
  EXPECT_DOUBLE_EQ(ballistic_mean(2.0, p, 1e-6, 4.0), 1e-6 + p.hbar * 4.0 * 2.0 / p.m);
}

TEST(MeanSquare, FreeLinearCubicOracle) {
  auto p = presets::fig1();
  for (double t : {0.01, 0.5, 3.0}) {
    double cubic = p.lambda * p.hbar * p.hbar * t * t * t / (3.0 * p.m * p.m);
    EXPECT_LT(rel(mean_square_x(t, p, presets::kFig1A0, 0.0, 0.0, Unraveling::linear), cubic), 1e-10);
  }
}

TEST(GaussianSde, BudgetAndPositivity) {
  auto p = presets::fig1();
  double rate = gaussian_stiffness(p, presets::kFig1A0);
  EXPECT_NEAR(rate, std::sqrt(2.0 * p.hbar * p.lambda / p.m), 1e-12 * rate);
  EXPECT_THROW(check_gaussian_budget(p, presets::kFig1A0, 0.02 / rate), StabilityError);
  EXPECT_NO_THROW(check_gaussian_budget(p, presets::kFig1A0, 0.01 / rate));
  GaussianState g{presets::kFig1A0, 0.0, 0.0};
  const double dt = 0.005 / rate;
  for (std::uint64_t k = 0; k < 5000; ++k) {
    g = gaussian_sde_step(g, p, Unraveling::nonlinear, std::sqrt(dt) * gaussian_at(2, k), dt);
    ASSERT_GT(g.a.real(), 0.0);
  }
}

TEST(GaussianSde, LinearCentroidHeatsAsPredicted) {
  auto p = presets::harmonic();
  Complex a0 = presets::harmonic_a0();
  const double T = 2e-4, dt = 1e-6;
  const std::size_t N = 3000;
  double s1 = 0, s2 = 0;
  for (std::size_t j = 0; j < N; ++j) {
    GaussianState g{a0, 0.0, 0.0};
    for (std::size_t k = 0; k < 200; ++k)
      g = gaussian_sde_step(g, p, Unraveling::linear, std::sqrt(dt) * gaussian_at(derive_seed(6, j), k), dt);
    s1 += g.x_bar * g.x_bar;
    s2 += std::pow(g.x_bar, 4);
  }
  double mean = s1 / N, se = std::sqrt((s2 / N - mean * mean) / N);
  EXPECT_LT(std::abs(mean - mean_square_x(T, p, a0, 0.0, 0.0, Unraveling::linear)), 4.0 * se);
}

TEST(Riccati, ClosedFormsSatisfyTheirEquations) {
  for (const auto& c : cases()) {
    double rate = gaussian_stiffness(c.p, c.a0);
    const std::size_t n = 400;
    const double h = (5.0 / rate) / n;
    std::vector<CovarianceMatrix> a, b, v;
    for (std::size_t i = 0; i <= n; ++i) {
      a.push_back(sigma_matrix(i * h, c.p, c.a0, Unraveling::nonlinear));
      b.push_back(sigma_matrix(i * h, c.p, c.a0, Unraveling::linear));
      v.push_back(var_matrix(i * h, c.p, c.a0));
    }
    const std::pair<std::vector<CovarianceMatrix>*, RiccatiKind> runs[] = {
        {&a, RiccatiKind::nonlinear}, {&b, RiccatiKind::linear}, {&v, RiccatiKind::variance}};
    for (auto [s, k] : runs) {
      auto r = riccati_residual(*s, riccati_matrices(c.p, k), h);
      EXPECT_LT(*std::max_element(r.begin(), r.end()), 1e-3) << c.name;
    }
  }
}

TEST(Riccati, CoarseGridIsRejected) {
  auto p = presets::fig1();
  Complex a0 = presets::kFig1A0;
  double rate = gaussian_stiffness(p, a0);
  std::vector<CovarianceMatrix> s;
  for (int i = 0; i <= 4; ++i) s.push_back(sigma_matrix(i * 5.0 / rate, p, a0, Unraveling::nonlinear));
  EXPECT_THROW(riccati_residual(s, riccati_matrices(p, RiccatiKind::nonlinear), 5.0 / rate), std::invalid_argument);
  EXPECT_THROW(riccati_residual(std::span(s).first(2), riccati_matrices(p, RiccatiKind::nonlinear), 1.0),
               std::invalid_argument);
}

TEST(Atanh, AccurateNearZeroAndAgreesWithStd) {
  EXPECT_NEAR(atanh_accurate(Complex(1e-20, 0.0)).real(), 1e-20, 1e-36);
  for (Complex z : {Complex(0.3, 0.2), Complex(-0.7, 0.1), Complex(2.0, 0.5)})
    EXPECT_LT(std::abs(atanh_accurate(z) - std::atanh(z)), 1e-14);
}
