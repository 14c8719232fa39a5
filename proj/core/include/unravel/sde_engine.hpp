#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "unravel/linalg.hpp"
#include "unravel/noise.hpp"

namespace unravel {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StabilityError : public std::invalid_argument {
 public:
  StabilityError(const std::string& what, double max_dt) : std::invalid_argument(what), max_dt_(max_dt) {}
  double suggested_max_dt() const { return max_dt_; }

 private:
  double max_dt_;
};

struct UnravelingParams {
  double xi_R = 1.0;
  double xi_I = 0.0;
  double lambda = 1.0;

  // Collapse unraveling, xi = 1.
  static UnravelingParams nonlinear(double lambda);
  // Norm-preserving unitary unraveling, xi = -i.
  static UnravelingParams linear(double lambda);

  Complex xi() const { return {xi_R, xi_I}; }
  // Throws std::invalid_argument unless xi_R >= 0, |xi| = 1 and lambda >= 0.
  void validate() const;
};

struct ModelSpec {
  HermitianOperator H;
  HermitianOperator L;
  double hbar = 1.0;

  std::size_t dim() const { return H.dim(); }
  void validate() const;
};

enum class Scheme {
  // Euler-Maruyama plus the Ito (dW^2 - dt) correction of the diffusion
  // term, then renormalization. Default.
  milstein,
  // Plain Euler-Maruyama plus renormalization.
  euler_maruyama,
};

// Largest dt with lambda * max|eig L|^2 * dt <= kTol.stability_budget.
double max_stable_dt(const ModelSpec& model, const UnravelingParams& u);
void check_stability_budget(const ModelSpec& model, const UnravelingParams& u, double dt);

// One step of the xi-family SSE with precomputed operators. Cheap to copy.
class SseStepper {
 public:
  SseStepper(const ModelSpec& model, const UnravelingParams& u, double dt, Scheme scheme = Scheme::milstein);

  // Unnormalized increment applied to psi; psi must be normalized.
  StateVector advance_raw(const StateVector& psi, double dW) const;
  // advance_raw followed by renormalization. Throws NumericalError on
  // non-finite output.
  StateVector advance(const StateVector& psi, double dW) const;

  double dt() const { return dt_; }

 private:
  Matrix H_, L_, L2_;
  Complex xi_;
  double xi_R_, lambda_, hbar_, dt_;
  Scheme scheme_;
};

StateVector sse_step(const StateVector& psi, const ModelSpec& model, const UnravelingParams& u, double dW,
                     double dt, Scheme scheme = Scheme::milstein);
StateVector sse_step_unnormalized(const StateVector& psi, const ModelSpec& model, const UnravelingParams& u,
                                  double dW, double dt, Scheme scheme = Scheme::milstein);

struct TrajectoryOptions {
  std::vector<HermitianOperator> observables;
  // Store every stride-th step (always including t = 0).
  std::size_t stride = 1;
  bool keep_states = true;
  bool keep_noise = true;
  bool keep_record = true;
  Scheme scheme = Scheme::milstein;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<StateVector> states;
  // conditional_means[i][k]: observable i at times[k].
  std::vector<std::vector<double>> conditional_means;
  // Per integration step; empty when xi_R = 0 or not requested.
  RecordSeries record;
  // Per integration step when keep_noise.
  NoisePath noise;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t stride = 1;
};

TrajectoryRecord simulate_trajectory(const ModelSpec& model, const UnravelingParams& u, const StateVector& psi0,
                                     double dt, std::size_t n_steps, std::uint64_t seed,
                                     const TrajectoryOptions& opts = {});

// Drives the trajectory with a given path (dt taken from the path).
TrajectoryRecord simulate_trajectory(const ModelSpec& model, const UnravelingParams& u, const StateVector& psi0,
                                     const NoisePath& path, const TrajectoryOptions& opts = {});

// Trajectory k uses derive_seed(base_seed, k); output is in k order
// regardless of thread count.
std::vector<TrajectoryRecord> simulate_ensemble(const ModelSpec& model, const UnravelingParams& u,
                                                const StateVector& psi0, double dt, std::size_t n_steps,
                                                std::uint64_t base_seed, std::size_t n_trajectories,
                                                const TrajectoryOptions& opts = {}, unsigned threads = 1);

// One classical RK4 step of the Lindblad equation.
DensityMatrix lindblad_step(const DensityMatrix& rho, const ModelSpec& model, double lambda, double dt);

// RK4 from t = 0 to each of the (ascending) times with internal step <= dt.
std::vector<DensityMatrix> lindblad_evolve(const DensityMatrix& rho0, const ModelSpec& model, double lambda,
                                           double dt, std::span<const double> times);

std::vector<DensityMatrix> ensemble_average(std::span<const TrajectoryRecord> trajectories,
                                            std::span<const double> at_times);

// Per-step residual of <O>^power against its Ito SDE. Needs stride 1,
// stored states and stored noise.
std::vector<double> conditional_moment_flow_residual(const TrajectoryRecord& trajectory,
                                                     const HermitianOperator& observable, const ModelSpec& model,
                                                     const UnravelingParams& u, int power);

double rms(std::span<const double> values);

}  // namespace unravel
