#include "unravel/spin_model.hpp"

#include <cmath>
#include <stdexcept>

namespace unravel {

namespace {

void check_spin_state(const StateVector& psi0) {
  if (psi0.dim() != 2) throw DimensionError("spin state must have dimension 2");
  if (!psi0.is_normalized(kTol.stored_normalization)) throw std::invalid_argument("spin state is not normalized");
}

// normalize(diag(e^{s - i phi}, e^{-s + i phi}) psi0) without overflow.
StateVector diagonal_normalized(double s, double phi, const StateVector& psi0) {
  double shift = std::abs(s);
  Complex up = psi0[0] * std::exp(s - shift) * std::polar(1.0, -phi);
  Complex down = psi0[1] * std::exp(-s - shift) * std::polar(1.0, phi);
  StateVector out{up, down};
  return out.normalized();
}

double sz(const StateVector& psi) { return (std::norm(psi[0]) - std::norm(psi[1])) / psi.norm2(); }

void check_dense(const TrajectoryRecord& tr) {
  if (tr.stride != 1 || tr.states.size() != tr.times.size() || tr.states.empty())
    throw std::invalid_argument("flow residual: trajectory must store every step");
  if (tr.noise.size() + 1 != tr.states.size())
    throw std::invalid_argument("flow residual: trajectory must store its noise");
}

}  // namespace

void SpinParams::validate() const {
  if (!std::isfinite(nu)) throw std::invalid_argument("nu must be finite");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw std::invalid_argument("hbar must be positive");
}

ModelSpec spin_model(const SpinParams& sp) {
  sp.validate();
  return {(sp.hbar * sp.nu) * pauli(Axis::z), pauli(Axis::z), sp.hbar};
}

StateVector spin_linear_solution(double t, double W_t, const StateVector& psi0, const SpinParams& sp) {
  check_spin_state(psi0);
  double phi = sp.nu * t + std::sqrt(sp.lambda) * W_t;
  return StateVector{psi0[0] * std::polar(1.0, -phi), psi0[1] * std::polar(1.0, phi)};
}

StateVector spin_nonlinear_closed_form(double t, double W_t, double sigma_z_integral, const StateVector& psi0,
                                       const SpinParams& sp) {
  check_spin_state(psi0);
  double s = std::sqrt(sp.lambda) * W_t + 2.0 * sp.lambda * sigma_z_integral;
  return diagonal_normalized(s, sp.nu * t, psi0);
}

GirsanovTrajectory spin_girsanov_trajectory(const StateVector& psi0, const SpinParams& sp, const NoisePath& physical,
                                            std::size_t stride) {
  sp.validate();
  check_spin_state(psi0);
  if (physical.tag != MeasureTag::physical) throw std::invalid_argument("girsanov route needs a physical path");
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  check_stability_budget(spin_model(sp), UnravelingParams::nonlinear(sp.lambda), physical.dt);
  const double dt = physical.dt;
  const double sl = std::sqrt(sp.lambda);
  const std::size_t n = physical.size();
  GirsanovTrajectory g;
  g.raw_noise.seed = physical.seed;
  g.raw_noise.dt = dt;
  g.raw_noise.tag = MeasureTag::raw;
  g.raw_noise.increments.resize(n);
  g.drift.resize(n);
  g.sigma_z_integral.assign(n + 1, 0.0);
  TrajectoryRecord& rec = g.record;
  rec.dt = dt;
  rec.stride = stride;
  rec.seed = physical.seed;
  rec.noise = physical;
  rec.conditional_means.assign(1, {});

  StateVector psi = psi0;
  auto store = [&](std::size_t k) {
    rec.times.push_back(static_cast<double>(k) * dt);
    rec.states.push_back(psi);
    rec.conditional_means[0].push_back(sz(psi));
  };
  store(0);
  double W = 0.0;
  double integral = 0.0;
  double m = sz(psi);
  for (std::size_t k = 0; k < n; ++k) {
    const double W_next = W + physical.increments[k];
    const double t_next = static_cast<double>(k + 1) * dt;
    // Fixed point for I_{k+1} = I_k + (m_k + m_{k+1}) dt / 2.
    double m_next = m;
    double I_next = integral + m * dt;
    StateVector trial = psi;
    for (int it = 0; it < 50; ++it) {
      trial = spin_nonlinear_closed_form(t_next, W_next, I_next, psi0, sp);
      double m_new = sz(trial);
      double I_new = integral + 0.5 * (m + m_new) * dt;
      bool done = std::abs(I_new - I_next) <= 1e-15 * std::max(1.0, std::abs(I_new));
      I_next = I_new;
      m_next = m_new;
      if (done) break;
    }
    trial = spin_nonlinear_closed_form(t_next, W_next, I_next, psi0, sp);
    g.drift[k] = sl * (m + m_next);  // 2 sqrt(lambda) times the trapezoid mean
    g.raw_noise.increments[k] = physical.increments[k] + g.drift[k] * dt;
    g.sigma_z_integral[k + 1] = I_next;
    psi = trial;
    m = sz(psi);
    W = W_next;
    integral = I_next;
    if ((k + 1) % stride == 0) store(k + 1);
  }
  return g;
}

TrajectoryRecord spin_nonlinear_trajectory(const StateVector& psi0, const SpinParams& sp, const NoisePath& physical,
                                           NonlinearRoute route, std::size_t stride) {
  if (route == NonlinearRoute::girsanov) return spin_girsanov_trajectory(psi0, sp, physical, stride).record;
  TrajectoryOptions opts;
  opts.observables = {pauli(Axis::z)};
  opts.stride = stride;
  return simulate_trajectory(spin_model(sp), UnravelingParams::nonlinear(sp.lambda), psi0, physical, opts);
}

TrajectoryRecord spin_nonlinear_trajectory(const StateVector& psi0, const SpinParams& sp, double dt,
                                           std::size_t n_steps, std::uint64_t seed, NonlinearRoute route,
                                           std::size_t stride) {
  return spin_nonlinear_trajectory(psi0, sp, wiener_path(seed, dt, n_steps), route, stride);
}

double CollapseReport::fraction_up() const {
  return total() == 0 ? 0.0 : static_cast<double>(n_up) / static_cast<double>(total());
}

double CollapseReport::fraction_unresolved() const {
  return total() == 0 ? 0.0 : static_cast<double>(n_unresolved) / static_cast<double>(total());
}

CollapseReport collapse_statistics(std::span<const TrajectoryRecord> ensemble, const StateVector& psi0,
                                   double threshold) {
  check_spin_state(psi0);
  CollapseReport r;
  r.threshold = threshold;
  r.born_p_up = std::norm(psi0[0]);
  for (const auto& tr : ensemble) {
    if (tr.states.empty()) throw std::invalid_argument("collapse_statistics: trajectory stores no states");
    double m = sz(tr.states.back());
    if (m > threshold)
      ++r.n_up;
    else if (m < -threshold)
      ++r.n_down;
    else
      ++r.n_unresolved;
  }
  return r;
}

double collapse_bound(double sigma0, double lambda, double t) { return sigma0 / (1.0 + 4.0 * lambda * sigma0 * t); }

bool SupermartingaleReport::all_below_bound() const {
  for (const auto& r : rows)
    if (!r.below_bound) return false;
  return true;
}

bool SupermartingaleReport::all_non_increasing() const {
  for (const auto& r : rows)
    if (!r.non_increasing) return false;
  return true;
}

SupermartingaleReport supermartingale_check(std::span<const TrajectoryRecord> ensemble, const SpinParams& sp) {
  if (ensemble.empty()) throw std::invalid_argument("supermartingale_check: empty ensemble");
  const auto& ref = ensemble.front();
  const std::size_t nt = ref.states.size();
  if (nt == 0 || nt != ref.times.size()) throw std::invalid_argument("supermartingale_check: no stored states");
  for (const auto& tr : ensemble)
    if (tr.states.size() != nt) throw std::invalid_argument("supermartingale_check: inconsistent grids");
  const double n = static_cast<double>(ensemble.size());
  SupermartingaleReport rep;
  rep.rows.resize(nt);
  double sigma0 = 0.0;
  for (const auto& tr : ensemble) {
    double m = sz(tr.states[0]);
    sigma0 += (1.0 - m * m) / n;
  }
  for (std::size_t k = 0; k < nt; ++k) {
    double s1 = 0.0, s2 = 0.0;
    for (const auto& tr : ensemble) {
      double m = sz(tr.states[k]);
      double v = 1.0 - m * m;
      s1 += v;
      s2 += v * v;
    }
    double mean = s1 / n;
    double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
    SupermartingaleRow& row = rep.rows[k];
    row.t = ref.times[k];
    row.mean_sigma = mean;
    row.standard_error = std::sqrt(var / n);
    row.bound = collapse_bound(sigma0, sp.lambda, row.t);
    row.below_bound = mean <= row.bound + 4.0 * row.standard_error + 1e-12;
    if (k > 0) {
      const auto& prev = rep.rows[k - 1];
      row.non_increasing = mean <= prev.mean_sigma + 4.0 * std::max(row.standard_error, prev.standard_error) + 1e-12;
    }
  }
  return rep;
}

std::vector<double> moment_flow_residual(const TrajectoryRecord& trajectory, int n, const SpinParams& sp) {
  if (n < 1) throw std::invalid_argument("moment_flow_residual: n must be >= 1");
  check_dense(trajectory);
  const double sl = std::sqrt(sp.lambda);
  // sigma_z^n is the identity for even n and sigma_z for odd n.
  auto moment = [](const StateVector& psi, int power) { return power % 2 == 0 ? 1.0 : sz(psi); };
  std::vector<double> res(trajectory.noise.size());
  for (std::size_t k = 0; k < res.size(); ++k) {
    const StateVector& psi = trajectory.states[k];
    double mn = moment(psi, n);
    double rhs = 2.0 * sl * (moment(psi, n + 1) - sz(psi) * mn) * trajectory.noise.increments[k];
    res[k] = (moment(trajectory.states[k + 1], n) - mn) - rhs;
  }
  return res;
}

std::vector<double> variance_flow_residual(const TrajectoryRecord& trajectory, const SpinParams& sp) {
  check_dense(trajectory);
  const double sl = std::sqrt(sp.lambda);
  const double dt = trajectory.dt;
  std::vector<double> res(trajectory.noise.size());
  for (std::size_t k = 0; k < res.size(); ++k) {
    double m = sz(trajectory.states[k]);
    double m1 = sz(trajectory.states[k + 1]);
    double sigma = 1.0 - m * m;
    double beta = -2.0 * m * sigma;
    double rhs = -4.0 * sp.lambda * sigma * sigma * dt + 2.0 * sl * beta * trajectory.noise.increments[k];
    res[k] = ((1.0 - m1 * m1) - sigma) - rhs;
  }
  return res;
}

}  // namespace unravel
