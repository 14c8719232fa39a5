#include "unravel/bell_demo.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "unravel/sde_engine.hpp"
#include "unravel/spin_model.hpp"

namespace unravel {

namespace {

// Alice's outcome kets for the basis.
std::pair<StateVector, StateVector> alice_kets(Basis basis) {
  if (basis == Basis::z) return {StateVector{1.0, 0.0}, StateVector{0.0, 1.0}};
  const double r = 1.0 / std::sqrt(2.0);
  return {StateVector{r, r}, StateVector{r, -r}};
}

// <a|_Alice applied to a two-qubit state, leaving Bob's (unnormalized) ket.
StateVector contract_alice(const StateVector& a, const StateVector& joint) {
  StateVector bob(2);
  for (std::size_t j = 0; j < 2; ++j) bob[j] = std::conj(a[0]) * joint[j] + std::conj(a[1]) * joint[2 + j];
  return bob;
}

// Global phase fixed so the first non-negligible amplitude is real positive.
StateVector canonical_phase(const StateVector& v) {
  StateVector out = v;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (std::abs(v[i]) > 1e-300) {
      Complex ph = std::abs(v[i]) / v[i];
      out *= ph;
      out[i] = std::abs(v[i]);
      break;
    }
  }
  return out;
}

double sigma_z_spread(const StateVector& psi) {
  static const HermitianOperator sz = pauli(Axis::z);
  return conditional_covariance(psi, sz, sz);
}

BellOutcome build(Basis basis, double p0, double p1, const StateVector& b0, const StateVector& b1) {
  BellOutcome out;
  out.basis = basis;
  out.bob_states = {{b0, p0}, {b1, p1}};
  std::vector<StateVector> states{b0, b1};
  std::vector<double> w{p0, p1};
  out.bob_rho = density_from_ensemble(states, w);
  out.mean_sigma = p0 * sigma_z_spread(b0) + p1 * sigma_z_spread(b1);
  return out;
}

}  // namespace

StateVector singlet() {
  const double r = 1.0 / std::sqrt(2.0);
  return StateVector{0.0, r, -r, 0.0};
}

BellOutcome alice_measures(Basis basis) {
  auto [a0, a1] = alice_kets(basis);
  StateVector s = singlet();
  StateVector b0 = contract_alice(a0, s);
  StateVector b1 = contract_alice(a1, s);
  double w0 = b0.norm2(), w1 = b1.norm2();
  return build(basis, w0 / (w0 + w1), w1 / (w0 + w1), canonical_phase(b0.normalized()),
               canonical_phase(b1.normalized()));
}

BellOutcome alice_measures_sampled(Basis basis, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("alice_measures_sampled: n_pairs must be >= 1");
  BellOutcome exact = alice_measures(basis);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution first(exact.bob_states[0].second);
  std::size_t n0 = 0;
  for (std::size_t k = 0; k < n_pairs; ++k) n0 += first(rng) ? 1 : 0;
  double p0 = static_cast<double>(n0) / static_cast<double>(n_pairs);
  return build(basis, p0, 1.0 - p0, exact.bob_states[0].first, exact.bob_states[1].first);
}

SignalingGap signaling_gap(const BellOutcome& a, const BellOutcome& b) {
  return {max_abs_diff(a.bob_rho.matrix(), b.bob_rho.matrix()), std::abs(a.mean_sigma - b.mean_sigma)};
}

double projective_analogue(Axis measured) {
  if (measured == Axis::y) throw std::invalid_argument("projective_analogue: only z and x are modelled");
  BellOutcome o = alice_measures(measured == Axis::z ? Basis::z : Basis::x);
  // Bob's conditional ensembles are exactly the post-measurement ensembles of
  // I/2 in the same basis.
  return o.mean_sigma;
}

DynamicalAnalogue dynamical_analogue(const DynamicalAnalogueOptions& opts) {
  SpinParams sp{opts.nu, opts.lambda, 1.0};
  ModelSpec model = spin_model(sp);
  const double r = 1.0 / std::sqrt(2.0);
  StateVector plus_x{r, r};
  auto n_steps = static_cast<std::size_t>(std::llround(opts.t_final / opts.dt));
  TrajectoryOptions to;
  to.stride = n_steps;
  to.keep_noise = false;
  to.keep_record = false;
  auto nl = simulate_ensemble(model, UnravelingParams::nonlinear(opts.lambda), plus_x, opts.dt, n_steps, opts.seed,
                              opts.n_trajectories, to, opts.threads);
  auto li = simulate_ensemble(model, UnravelingParams::linear(opts.lambda), plus_x, opts.dt, n_steps,
                              opts.seed ^ 0x5bd1e995ULL, opts.n_trajectories, to, opts.threads);
  const double T = static_cast<double>(n_steps) * opts.dt;
  std::vector<double> at{T};
  DynamicalAnalogue out;
  out.rho_nonlinear = ensemble_average(nl, at).front();
  out.rho_linear = ensemble_average(li, at).front();
  out.rho_lindblad =
      lindblad_evolve(DensityMatrix::pure(plus_x), model, opts.lambda, opts.dt / 10.0, at).front();
  double s_nl = 0.0, s_li = 0.0;
  for (const auto& tr : nl) s_nl += sigma_z_spread(tr.states.back());
  for (const auto& tr : li) s_li += sigma_z_spread(tr.states.back());
  out.mean_sigma_nonlinear = s_nl / static_cast<double>(nl.size());
  out.mean_sigma_linear = s_li / static_cast<double>(li.size());
  out.rho_distance = max_abs_diff(out.rho_nonlinear.matrix(), out.rho_linear.matrix());
  out.tolerance = 5.0 / std::sqrt(static_cast<double>(opts.n_trajectories));
  return out;
}

}  // namespace unravel
