#pragma once

#include <vector>

#include "unravel/linalg.hpp"

namespace unravel {

// Parameters of A(dy) = N exp(-(gamma/dt)(c dy - d L dt)^2) and of the
// record dy = a <L> dt + b dW / (2 sqrt(gamma)).
struct GcmParams {
  double a = 1.0;
  double b = 1.0;
  Complex c;
  Complex d;
  Complex xi;
  double gamma = 1.0;

  Complex alpha() const { return c * d * a; }
  Complex beta() const { return d * d * (1.0 - 0.5 * c * c * b * b); }
  Complex epsilon() const { return c * d * b; }
};

// Throws std::invalid_argument unless xi_R > 0, |xi| = 1, gamma > 0.
GcmParams solve_gcm_params(Complex xi, double gamma);

enum class KrausNormalization {
  // |N|^2 = sqrt(2 gamma Re(c^2) / (pi dt)): int A^dagger A dy = I.
  povm,
  // The normalization that forces E[dy] = <L> dt instead; differs from
  // povm by the factor 1/xi_R.
  first_moment,
};

double kraus_norm_squared(const GcmParams& gp, double dt, KrausNormalization norm);

struct KrausOperator {
  Matrix matrix;
  double dy = 0.0;
  double dt = 0.0;
  double norm_constant = 0.0;  // N, real and positive
};

KrausOperator kraus_operator(const HermitianOperator& L, const GcmParams& gp, double dy, double dt,
                             KrausNormalization norm = KrausNormalization::povm);

struct KrausResult {
  StateVector state;  // A(dy) psi, unnormalized
  double weight = 0.0;  // ||A(dy) psi||^2, the outcome density
};

KrausResult kraus_apply(const StateVector& psi, const HermitianOperator& L, const GcmParams& gp, double dy, double dt,
                        KrausNormalization norm = KrausNormalization::povm);

// Standard deviation of the outcome kernel, sqrt(dt / (4 gamma)).
double outcome_sigma(const GcmParams& gp, double dt);

// Uniform grid of n points covering every eigen-outcome mean +- 8 sigma.
std::vector<double> outcome_grid(const HermitianOperator& L, const GcmParams& gp, double dt, std::size_t n = 10000);

struct RecordMeanStatistic {
  double mean_povm = 0.0;          // int dy ||A psi||^2 with povm normalization
  double mean_first_moment = 0.0;  // same integral with first_moment normalization
  double total_povm = 0.0;         // int ||A psi||^2
  double total_first_moment = 0.0;
  double expected_xi_R = 0.0;      // xi_R <L> dt
  double expected_plain = 0.0;     // <L> dt
  double gaussian_integral = 0.0;  // closed-form sum_j |psi_j|^2 a l_j dt
};

RecordMeanStatistic record_mean_check(const StateVector& psi, const HermitianOperator& L, const GcmParams& gp,
                                      double dt, std::size_t n_samples = 10000);

// max |int A^dagger A dy - I| on the truncated grid.
double povm_completeness(const HermitianOperator& L, const GcmParams& gp, double dt, std::size_t n = 10000);

// int A rho A^dagger dy on the truncated grid.
Matrix kraus_channel_average(const DensityMatrix& rho, const HermitianOperator& L, const GcmParams& gp, double dt,
                             std::size_t n = 10000);

}  // namespace unravel
