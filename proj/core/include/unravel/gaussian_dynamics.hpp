#pragma once

#include <array>
#include <span>
#include <vector>

#include "unravel/linalg.hpp"

namespace unravel {

inline constexpr double kHbarSI = 1.054571817e-34;

enum class Unraveling { nonlinear, linear };

struct MechanicalParams {
  double m = 1.0;
  double omega = 0.0;  // 0 for the free particle
  double lambda = 0.0;
  double hbar = kHbarSI;

  void validate() const;
};

// psi(x) ~ exp[-a (x - x_bar)^2 + i k_bar x]; the normalization/phase
// factor is not tracked.
struct GaussianState {
  Complex a;
  double x_bar = 0.0;
  double k_bar = 0.0;
};

enum class SpreadProfile {
  hyperbolic,  // a_t = c tanh(b t + k)
  ballistic,   // a_t = a0 / (1 + 2 i hbar a0 t / m), free linear case
};

struct SpreadConstants {
  Complex b;
  Complex c;
  Complex k;
  Complex a0;
  SpreadProfile profile = SpreadProfile::hyperbolic;
  double hbar_over_m = 0.0;
};

// Throws std::invalid_argument for a0.re <= 0 and std::domain_error for a0 == c.
SpreadConstants spread_constants(const MechanicalParams& p, Complex a0, Unraveling u);

// tanh^{-1}(z) on the principal branch, accurate for small |z|.
Complex atanh_accurate(Complex z);

// Throws std::domain_error at a pole of the hyperbolic profile.
Complex a_closed_form(double t, const SpreadConstants& sc);

// Right-hand side of the width equation, da/dt.
Complex a_rhs(Complex a, const MechanicalParams& p, Unraveling u);

// Conditional position spread 1/(4 a_t^R).
double sigma_x(double t, const MechanicalParams& p, Complex a0, Unraveling u);

// The printed ratio formulas for the free particle, for cross-checking.
double sigma_x_free_nonlinear_literal(double t, const MechanicalParams& p, Complex a0);
double sigma_x_free_linear_literal(double t, const MechanicalParams& p, Complex a0);

// Unraveling-independent variance Tr[x^2 rho] - Tr[x rho]^2.
double var_x(double t, const MechanicalParams& p, Complex a0);
// The printed harmonic formula in terms of k^R, k^I derived from x_v, y_v.
double var_x_harmonic_literal(double t, const MechanicalParams& p, Complex a0);

// E[<x>] (noise-free centroid).
double ballistic_mean(double t, const MechanicalParams& p, double x_bar0, double k_bar0);

// E[<x>_t^2] = ballistic^2 + Ito-isometry integral over the deterministic a_s.
// Adaptive Simpson; throws std::runtime_error if it does not converge.
double mean_square_x(double t, const MechanicalParams& p, Complex a0, double x_bar0, double k_bar0, Unraveling u);

// Largest rate in the parameter equations; dt * rate must stay below the budget.
double gaussian_stiffness(const MechanicalParams& p, Complex a0);
void check_gaussian_budget(const MechanicalParams& p, Complex a0, double dt);

// One Euler-Maruyama step of the parameter SDEs. Throws NumericalError if
// a.re <= 0 afterwards.
GaussianState gaussian_sde_step(const GaussianState& g, const MechanicalParams& p, Unraveling u, double dW,
                                double dt);

using Mat2 = std::array<std::array<double, 2>, 2>;

struct RiccatiMatrices {
  Mat2 alpha{};
  Mat2 beta{};
  Mat2 delta{};
};

enum class RiccatiKind { nonlinear, linear, variance };

RiccatiMatrices riccati_matrices(const MechanicalParams& p, RiccatiKind which);

struct CovarianceMatrix {
  double sxx = 0.0;
  double sxp = 0.0;
  double spp = 0.0;

  double det() const { return sxx * spp - sxp * sxp; }
  Mat2 as_matrix() const { return {{{sxx, sxp}, {sxp, spp}}}; }
};

CovarianceMatrix covariance_from_width(Complex a, double hbar);
// Conditional covariance along either unraveling.
CovarianceMatrix sigma_matrix(double t, const MechanicalParams& p, Complex a0, Unraveling u);
// Density-matrix covariance.
CovarianceMatrix var_matrix(double t, const MechanicalParams& p, Complex a0);

// Right-hand side alpha S + S alpha^T + delta - S beta beta^T S.
CovarianceMatrix riccati_rhs(const CovarianceMatrix& s, const RiccatiMatrices& mats);

// Per interior grid point: max over components of |central difference - rhs|,
// each component scaled by its largest rhs magnitude over the series.
std::vector<double> riccati_residual(std::span<const CovarianceMatrix> series, const RiccatiMatrices& mats, double dt);

namespace presets {
// x_bar0 = k_bar0 = 0, m = 1e-15 kg, a0 = 0.25e9 m^-2, lambda = 1e23 m^-2 Hz.
MechanicalParams fig1();
inline constexpr double kFig1A0 = 0.25e9;
// As fig1 with Omega = 1e4 Hz and a0 = 1e-3 m^-2. Numerically extreme.
MechanicalParams fig3();
inline constexpr double kFig3A0 = 1e-3;
// As fig3 but with a0 at half the linear-trap ground-state width.
MechanicalParams harmonic();
double harmonic_a0();
}  // namespace presets

}  // namespace unravel
