#pragma once

// Numerical tolerances shared by every module. Tests calibrate against these
// values rather than against literals scattered through the code.

namespace unravel {

struct Tolerances {
  // StateVector: |<psi|psi> - 1| for a "normalized" state.
  double normalization = 1e-12;
  // Stored trajectory states.
  double stored_normalization = 1e-10;
  // Imaginary residue of <psi|O|psi> for Hermitian O.
  double expectation_imag = 1e-12;
  // DensityMatrix invariants.
  double density_hermiticity = 1e-10;
  double density_trace = 1e-10;
  double density_min_eigenvalue = -1e-10;
  // Ensemble weights must sum to one.
  double weight_sum = 1e-10;
  // Hermiticity check for HermitianOperator::from_matrix (relative to max |entry|).
  double operator_hermiticity = 1e-12;
  // |xi| = 1 constraint on unraveling parameters.
  double xi_modulus = 1e-12;
  // Stability budget: lambda * max|eig L|^2 * dt must not exceed this.
  double stability_budget = 0.01;
  // Relative tolerance of the adaptive Simpson quadrature.
  double quadrature_relative = 1e-8;
  // Identities between measurement-operator parameters.
  double gcm_identity = 1e-10;
  // POVM completeness of the truncated outcome grid.
  double povm_completeness = 1e-6;
};

inline constexpr Tolerances kTol{};

}  // namespace unravel
