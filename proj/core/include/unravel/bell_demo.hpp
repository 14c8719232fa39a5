#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "unravel/linalg.hpp"

namespace unravel {

enum class Basis { z, x };

struct BellOutcome {
  Basis basis = Basis::z;
  std::vector<std::pair<StateVector, double>> bob_states;
  DensityMatrix bob_rho;
  double mean_sigma = 0.0;  // E[Sigma(sigma_z)] over Bob's ensemble
};

// (|up,down> - |down,up>) / sqrt(2), Alice first.
StateVector singlet();

// Exact conditional ensemble for Bob after Alice measures in `basis`.
BellOutcome alice_measures(Basis basis);
// Same with outcome frequencies drawn from n_pairs samples.
BellOutcome alice_measures_sampled(Basis basis, std::size_t n_pairs, std::uint64_t seed);

struct SignalingGap {
  double rho_distance = 0.0;  // max-norm of the difference of Bob's matrices
  double sigma_gap = 0.0;     // |mean_sigma difference|
};

SignalingGap signaling_gap(const BellOutcome& a, const BellOutcome& b);

// Sigma(sigma_z) averaged over the post-measurement ensemble of a projective
// measurement of `measured` on I/2.
double projective_analogue(Axis measured);

struct DynamicalAnalogueOptions {
  std::size_t n_trajectories = 5000;
  double t_final = 3.0;
  double dt = 1e-3;
  double lambda = 1.0;
  double nu = 0.0;
  std::uint64_t seed = 17;
  unsigned threads = 1;
};

struct DynamicalAnalogue {
  DensityMatrix rho_nonlinear;
  DensityMatrix rho_linear;
  DensityMatrix rho_lindblad;
  double mean_sigma_nonlinear = 0.0;
  double mean_sigma_linear = 0.0;
  double rho_distance = 0.0;  // max-norm nonlinear vs linear
  double tolerance = 0.0;     // 5 / sqrt(N)
};

// Bob's qubit from |+x> under both unravelings of the spin model.
DynamicalAnalogue dynamical_analogue(const DynamicalAnalogueOptions& opts = {});

}  // namespace unravel
