#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unravel/sde_engine.hpp"

namespace unravel {

// H = hbar nu sigma_z, L = sigma_z.
struct SpinParams {
  double nu = 1.0;
  double lambda = 1.0;
  double hbar = 1.0;

  void validate() const;
};

ModelSpec spin_model(const SpinParams& sp);

// exp[(-i nu t - i sqrt(lambda) W_t) sigma_z] psi0
StateVector spin_linear_solution(double t, double W_t, const StateVector& psi0, const SpinParams& sp);

// normalize(exp[(-i nu t + sqrt(lambda) W_t + 2 lambda I_t) sigma_z] psi0),
// I_t = int_0^t <sigma_z>_s ds.
StateVector spin_nonlinear_closed_form(double t, double W_t, double sigma_z_integral, const StateVector& psi0,
                                       const SpinParams& sp);

enum class NonlinearRoute {
  direct,    // sde_engine with xi = 1
  girsanov,  // linear evolution in the raw noise, normalize, change measure
};

struct GirsanovTrajectory {
  TrajectoryRecord record;
  // Raw-measure increments d xi_k = dW_k + 2 sqrt(lambda) <sigma_z> dt (trapezoid).
  NoisePath raw_noise;
  // Per-step drift that relates raw and physical noise.
  std::vector<double> drift;
  // I_t at every step (size n_steps + 1).
  std::vector<double> sigma_z_integral;
};

// Route (ii) on a given physical path. The trapezoid rule for I_t is
// solved self-consistently at each step.
GirsanovTrajectory spin_girsanov_trajectory(const StateVector& psi0, const SpinParams& sp, const NoisePath& physical,
                                            std::size_t stride = 1);

TrajectoryRecord spin_nonlinear_trajectory(const StateVector& psi0, const SpinParams& sp, const NoisePath& physical,
                                           NonlinearRoute route, std::size_t stride = 1);
TrajectoryRecord spin_nonlinear_trajectory(const StateVector& psi0, const SpinParams& sp, double dt,
                                           std::size_t n_steps, std::uint64_t seed,
                                           NonlinearRoute route = NonlinearRoute::direct, std::size_t stride = 1);

struct CollapseReport {
  std::size_t n_up = 0;
  std::size_t n_down = 0;
  std::size_t n_unresolved = 0;
  double threshold = 0.999;
  double born_p_up = 0.0;

  std::size_t total() const { return n_up + n_down + n_unresolved; }
  double fraction_up() const;
  double fraction_unresolved() const;
};

// Classifies by the final <sigma_z>; |<sigma_z>_T| <= threshold is unresolved.
CollapseReport collapse_statistics(std::span<const TrajectoryRecord> ensemble, const StateVector& psi0,
                                   double threshold = 0.999);

double collapse_bound(double sigma0, double lambda, double t);

struct SupermartingaleRow {
  double t = 0.0;
  double mean_sigma = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  bool below_bound = true;
  bool non_increasing = true;
};

struct SupermartingaleReport {
  std::vector<SupermartingaleRow> rows;
  bool all_below_bound() const;
  bool all_non_increasing() const;
};

// Needs stored states on a shared grid.
SupermartingaleReport supermartingale_check(std::span<const TrajectoryRecord> ensemble, const SpinParams& sp);

// Residual of d<sigma_z^n> = 2 sqrt(lambda)(<sigma_z^{n+1}> - <sigma_z><sigma_z^n>) dW.
std::vector<double> moment_flow_residual(const TrajectoryRecord& trajectory, int n, const SpinParams& sp);
// Residual of dSigma = -4 lambda Sigma^2 dt + 2 sqrt(lambda) beta dW, beta = -2 m (1 - m^2).
std::vector<double> variance_flow_residual(const TrajectoryRecord& trajectory, const SpinParams& sp);

}  // namespace unravel
