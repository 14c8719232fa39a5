#include "unravel/sde_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

namespace unravel {

namespace {

double budget_rate(const ModelSpec& model, const UnravelingParams& u) {
  double r = model.L.spectral_radius();
  return u.lambda * r * r;
}

void require_normalized(const StateVector& psi, const char* what) {
  if (!psi.is_normalized(kTol.stored_normalization))
    throw std::invalid_argument(std::string(what) + ": initial state is not normalized");
}

Matrix lindblad_rhs(const Matrix& rho, const Matrix& H, const Matrix& L, double lambda, double hbar) {
  const Complex mi_over_hbar(0.0, -1.0 / hbar);
  Matrix out = mi_over_hbar * commutator(H, rho);
  out -= Complex(0.5 * lambda) * commutator(L, commutator(L, rho));
  return out;
}

Matrix rk4(const Matrix& rho, const Matrix& H, const Matrix& L, double lambda, double hbar, double h) {
  Matrix k1 = lindblad_rhs(rho, H, L, lambda, hbar);
  Matrix k2 = lindblad_rhs(rho + Complex(0.5 * h) * k1, H, L, lambda, hbar);
  Matrix k3 = lindblad_rhs(rho + Complex(0.5 * h) * k2, H, L, lambda, hbar);
  Matrix k4 = lindblad_rhs(rho + Complex(h) * k3, H, L, lambda, hbar);
  Matrix sum = k1 + Complex(2.0) * k2 + Complex(2.0) * k3 + k4;
  Matrix out = rho + Complex(h / 6.0) * sum;
  // Keep the iterate exactly Hermitian.
  for (std::size_t i = 0; i < out.dim(); ++i) {
    out(i, i) = out(i, i).real();
    for (std::size_t j = i + 1; j < out.dim(); ++j) {
      Complex v = 0.5 * (out(i, j) + std::conj(out(j, i)));
      out(i, j) = v;
      out(j, i) = std::conj(v);
    }
  }
  return out;
}

class TrajectoryBuilder {
 public:
  TrajectoryBuilder(const TrajectoryOptions& opts, const ModelSpec& model, const UnravelingParams& u,
                    std::size_t n_steps, double dt)
      : opts_(opts), L_(model.L.matrix()), xi_R_(u.xi_R), lambda_(u.lambda) {
    if (opts.stride == 0) throw std::invalid_argument("trajectory stride must be >= 1");
    std::size_t stored = n_steps / opts.stride + 1;
    rec_.dt = dt;
    rec_.stride = opts.stride;
    rec_.times.reserve(stored);
    if (opts.keep_states) rec_.states.reserve(stored);
    rec_.conditional_means.assign(opts.observables.size(), {});
    for (auto& c : rec_.conditional_means) c.reserve(stored);
    for (const auto& o : opts.observables)
      if (o.dim() != model.dim()) throw DimensionError("tracked observable has wrong dimension");
    if (opts.keep_noise) {
      rec_.noise.dt = dt;
      rec_.noise.increments.reserve(n_steps);
    }
    want_record_ = opts.keep_record && u.xi_R > 0.0 && u.lambda > 0.0;
    if (want_record_) {
      rec_.record.dt = dt;
      rec_.record.values.reserve(n_steps);
    }
  }

  void store(std::size_t step, const StateVector& psi) {
    rec_.times.push_back(static_cast<double>(step) * rec_.dt);
    if (opts_.keep_states) rec_.states.push_back(psi);
    for (std::size_t i = 0; i < opts_.observables.size(); ++i)
      rec_.conditional_means[i].push_back(detail::rayleigh(psi, opts_.observables[i].matrix()).real());
  }

  void note_step(const StateVector& psi_before, double dW) {
    if (opts_.keep_noise) rec_.noise.increments.push_back(dW);
    if (want_record_) {
      double l = detail::rayleigh(psi_before, L_).real();
      rec_.record.values.push_back(xi_R_ * l * rec_.dt + dW / (2.0 * std::sqrt(lambda_)));
    }
  }

  TrajectoryRecord take() { return std::move(rec_); }

 private:
  const TrajectoryOptions& opts_;
  Matrix L_;
  double xi_R_, lambda_;
  bool want_record_ = false;
  TrajectoryRecord rec_;
};

template <class NoiseAt>
TrajectoryRecord run(const ModelSpec& model, const UnravelingParams& u, const StateVector& psi0, double dt,
                     std::size_t n_steps, const TrajectoryOptions& opts, NoiseAt noise_at) {
  model.validate();
  u.validate();
  if (psi0.dim() != model.dim()) throw DimensionError("initial state has wrong dimension");
  require_normalized(psi0, "simulate_trajectory");
  check_stability_budget(model, u, dt);
  SseStepper stepper(model, u, dt, opts.scheme);
  TrajectoryBuilder b(opts, model, u, n_steps, dt);
  StateVector psi = psi0.normalized();
  b.store(0, psi);
  for (std::size_t k = 0; k < n_steps; ++k) {
    double dW = noise_at(k);
    b.note_step(psi, dW);
    psi = stepper.advance(psi, dW);
    if ((k + 1) % opts.stride == 0) b.store(k + 1, psi);
  }
  return b.take();
}

}  // namespace

UnravelingParams UnravelingParams::nonlinear(double lambda) { return {1.0, 0.0, lambda}; }
UnravelingParams UnravelingParams::linear(double lambda) { return {0.0, -1.0, lambda}; }

void UnravelingParams::validate() const {
  if (!std::isfinite(xi_R) || !std::isfinite(xi_I) || !std::isfinite(lambda))
    throw std::invalid_argument("unraveling parameters must be finite");
  if (xi_R < 0.0) throw std::invalid_argument("unraveling requires xi_R >= 0");
  double mod2 = xi_R * xi_R + xi_I * xi_I;
  if (std::abs(mod2 - 1.0) > kTol.xi_modulus)
    throw std::invalid_argument("unraveling requires |xi| = 1, got |xi|^2 = " + std::to_string(mod2));
  if (lambda < 0.0) throw std::invalid_argument("unraveling requires lambda >= 0");
}

void ModelSpec::validate() const {
  if (H.dim() == 0 || H.dim() != L.dim()) throw DimensionError("ModelSpec: H and L dimensions differ");
  if (!(hbar > 0.0)) throw std::invalid_argument("ModelSpec: hbar must be positive");
}

double max_stable_dt(const ModelSpec& model, const UnravelingParams& u) {
  double rate = budget_rate(model, u);
  return rate > 0.0 ? kTol.stability_budget / rate : std::numeric_limits<double>::infinity();
}

void check_stability_budget(const ModelSpec& model, const UnravelingParams& u, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive and finite");
  double rate = budget_rate(model, u);
  if (rate * dt > kTol.stability_budget * (1.0 + 1e-12)) {
    double max_dt = max_stable_dt(model, u);
    throw StabilityError("stability budget violated: lambda*max|eig L|^2*dt = " + std::to_string(rate * dt) +
                             " > " + std::to_string(kTol.stability_budget) + "; use dt <= " +
                             std::to_string(max_dt),
                         max_dt);
  }
}

SseStepper::SseStepper(const ModelSpec& model, const UnravelingParams& u, double dt, Scheme scheme)
    : H_(model.H.matrix()),
      L_(model.L.matrix()),
      L2_(model.L.matrix() * model.L.matrix()),
      xi_(u.xi()),
      xi_R_(u.xi_R),
      lambda_(u.lambda),
      hbar_(model.hbar),
      dt_(dt),
      scheme_(scheme) {
  model.validate();
  u.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
}

StateVector SseStepper::advance_raw(const StateVector& psi, double dW) const {
  const std::size_t n = psi.dim();
  StateVector Hp(n), Lp(n), L2p(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex h = 0.0, l = 0.0, l2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      h += H_(i, j) * psi[j];
      l += L_(i, j) * psi[j];
      l2 += L2_(i, j) * psi[j];
    }
    Hp[i] = h;
    Lp[i] = l;
    L2p[i] = l2;
  }
  double ev = inner(psi, Lp).real();
  const double lam = lambda_;
  const double sl = std::sqrt(lam);
  const Complex mi_h(0.0, -dt_ / hbar_);
  // drift: -(lambda/2)(L^2 - 2 xi xi_R <L> L + xi_R^2 <L>^2)
  const Complex c_L2 = -0.5 * lam * dt_;
  const Complex c_L = lam * xi_ * xi_R_ * ev * dt_;
  double c_1 = -0.5 * lam * xi_R_ * xi_R_ * ev * ev * dt_;
  // diffusion: sqrt(lambda)(xi L - xi_R <L>) dW
  Complex d_L = sl * xi_ * dW;
  double d_1 = -sl * xi_R_ * ev * dW;
  Complex m_L2 = 0.0, m_L = 0.0;
  double m_1 = 0.0;
  if (scheme_ == Scheme::milstein) {
    // (1/2) lambda [(xi L - xi_R <L>)^2 - 2 xi_R^2 Var(L)] (dW^2 - dt)
    double var_L = inner(psi, L2p).real() - ev * ev;
    double q = 0.5 * lam * (dW * dW - dt_);
    m_L2 = q * xi_ * xi_;
    m_L = -2.0 * q * xi_ * xi_R_ * ev;
    m_1 = q * (xi_R_ * xi_R_ * ev * ev - 2.0 * xi_R_ * xi_R_ * var_L);
  }
  const Complex a_L2 = c_L2 + m_L2;
  const Complex a_L = c_L + d_L + m_L;
  const double a_1 = 1.0 + c_1 + d_1 + m_1;
  StateVector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a_1 * psi[i] + mi_h * Hp[i] + a_L * Lp[i] + a_L2 * L2p[i];
  return out;
}

StateVector SseStepper::advance(const StateVector& psi, double dW) const {
  StateVector out = advance_raw(psi, dW);
  double n2 = out.norm2();
  if (!std::isfinite(n2) || !(n2 > 0.0))
    throw NumericalError("sse step produced a non-finite or zero state; reduce dt");
  out *= 1.0 / std::sqrt(n2);
  return out;
}

StateVector sse_step(const StateVector& psi, const ModelSpec& model, const UnravelingParams& u, double dW,
                     double dt, Scheme scheme) {
  if (psi.dim() != model.dim()) throw DimensionError("sse_step: state dimension mismatch");
  require_normalized(psi, "sse_step");
  return SseStepper(model, u, dt, scheme).advance(psi, dW);
}

StateVector sse_step_unnormalized(const StateVector& psi, const ModelSpec& model, const UnravelingParams& u,
                                  double dW, double dt, Scheme scheme) {
  if (psi.dim() != model.dim()) throw DimensionError("sse_step: state dimension mismatch");
  require_normalized(psi, "sse_step");
  return SseStepper(model, u, dt, scheme).advance_raw(psi, dW);
}

TrajectoryRecord simulate_trajectory(const ModelSpec& model, const UnravelingParams& u, const StateVector& psi0,
                                     double dt, std::size_t n_steps, std::uint64_t seed,
                                     const TrajectoryOptions& opts) {
  const double s = std::sqrt(dt);
  TrajectoryRecord r = run(model, u, psi0, dt, n_steps, opts, [&](std::size_t k) { return s * gaussian_at(seed, k); });
  r.seed = seed;
  r.noise.seed = seed;
  return r;
}

TrajectoryRecord simulate_trajectory(const ModelSpec& model, const UnravelingParams& u, const StateVector& psi0,
                                     const NoisePath& path, const TrajectoryOptions& opts) {
  if (path.tag != MeasureTag::physical)
    throw std::invalid_argument("simulate_trajectory: noise path must be tagged physical");
  TrajectoryRecord r =
      run(model, u, psi0, path.dt, path.size(), opts, [&](std::size_t k) { return path.increments[k]; });
  r.seed = path.seed;
  r.noise.seed = path.seed;
  return r;
}

std::vector<TrajectoryRecord> simulate_ensemble(const ModelSpec& model, const UnravelingParams& u,
                                                const StateVector& psi0, double dt, std::size_t n_steps,
                                                std::uint64_t base_seed, std::size_t n_trajectories,
                                                const TrajectoryOptions& opts, unsigned threads) {
  // Validate once up front so errors surface on the calling thread.
  model.validate();
  u.validate();
  check_stability_budget(model, u, dt);
  std::vector<TrajectoryRecord> out(n_trajectories);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n_trajectories, 1))));
  if (threads == 1) {
    for (std::size_t k = 0; k < n_trajectories; ++k)
      out[k] = simulate_trajectory(model, u, psi0, dt, n_steps, derive_seed(base_seed, k), opts);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= n_trajectories || failed.load()) return;
      try {
        out[k] = simulate_trajectory(model, u, psi0, dt, n_steps, derive_seed(base_seed, k), opts);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

DensityMatrix lindblad_step(const DensityMatrix& rho, const ModelSpec& model, double lambda, double dt) {
  model.validate();
  if (rho.dim() != model.dim()) throw DimensionError("lindblad_step: dimension mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("lindblad_step: dt must be positive");
  return DensityMatrix::from_matrix(rk4(rho.matrix(), model.H.matrix(), model.L.matrix(), lambda, model.hbar, dt));
}

std::vector<DensityMatrix> lindblad_evolve(const DensityMatrix& rho0, const ModelSpec& model, double lambda,
                                           double dt, std::span<const double> times) {
  model.validate();
  if (rho0.dim() != model.dim()) throw DimensionError("lindblad_evolve: dimension mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("lindblad_evolve: dt must be positive");
  std::vector<DensityMatrix> out;
  out.reserve(times.size());
  Matrix rho = rho0.matrix();
  double t = 0.0;
  for (double target : times) {
    if (target < t) throw std::invalid_argument("lindblad_evolve: times must be ascending and >= 0");
    double span = target - t;
    auto n = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
    if (n > 0) {
      double h = span / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) rho = rk4(rho, model.H.matrix(), model.L.matrix(), lambda, model.hbar, h);
    }
    t = target;
    out.push_back(DensityMatrix::from_matrix(rho));
  }
  return out;
}

std::vector<DensityMatrix> ensemble_average(std::span<const TrajectoryRecord> trajectories,
                                            std::span<const double> at_times) {
  if (trajectories.empty()) throw std::invalid_argument("ensemble_average: no trajectories");
  const TrajectoryRecord& ref = trajectories.front();
  if (ref.states.size() != ref.times.size())
    throw std::invalid_argument("ensemble_average: trajectories do not store states");
  for (const auto& tr : trajectories) {
    if (tr.times.size() != ref.times.size() || tr.states.size() != ref.times.size())
      throw std::invalid_argument("ensemble_average: inconsistent time grids");
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      if (tr.times[k] != ref.times[k]) throw std::invalid_argument("ensemble_average: inconsistent time grids");
  }
  const double slack = 1e-9 * std::max(ref.dt, 1e-300);
  std::vector<DensityMatrix> out;
  out.reserve(at_times.size());
  const std::size_t dim = ref.states.front().dim();
  const double w = 1.0 / static_cast<double>(trajectories.size());
  for (double t : at_times) {
    auto it = std::find_if(ref.times.begin(), ref.times.end(),
                           [&](double s) { return std::abs(s - t) <= slack + 1e-12 * std::abs(t); });
    if (it == ref.times.end())
      throw std::invalid_argument("ensemble_average: time " + std::to_string(t) + " not on the stored grid");
    auto idx = static_cast<std::size_t>(it - ref.times.begin());
    Matrix rho(dim);
    for (const auto& tr : trajectories) rho += Complex(w) * Matrix::outer(tr.states[idx], tr.states[idx]);
    out.push_back(DensityMatrix::from_matrix(rho));
  }
  return out;
}

std::vector<double> conditional_moment_flow_residual(const TrajectoryRecord& trajectory,
                                                     const HermitianOperator& observable, const ModelSpec& model,
                                                     const UnravelingParams& u, int power) {
  if (power != 1 && power != 2) throw std::invalid_argument("moment flow residual: power must be 1 or 2");
  if (trajectory.stride != 1 || trajectory.states.size() != trajectory.times.size() ||
      trajectory.states.empty())
    throw std::invalid_argument("moment flow residual: trajectory must store every step");
  if (trajectory.noise.size() + 1 != trajectory.states.size())
    throw std::invalid_argument("moment flow residual: trajectory must store its noise");
  model.validate();
  u.validate();
  const Matrix& O = observable.matrix();
  const Matrix& H = model.H.matrix();
  const Matrix& L = model.L.matrix();
  const Matrix OH = commutator(O, H);
  const Matrix LLO = commutator(L, commutator(L, O));
  const Matrix OL_anti = anticommutator(O, L);
  const Matrix OL_comm = commutator(O, L);
  const double dt = trajectory.dt;
  const double sl = std::sqrt(u.lambda);
  std::vector<double> res(trajectory.noise.size());
  for (std::size_t k = 0; k < res.size(); ++k) {
    const StateVector& psi = trajectory.states[k];
    double o = detail::rayleigh(psi, O).real();
    double l = detail::rayleigh(psi, L).real();
    double o_next = detail::rayleigh(trajectory.states[k + 1], O).real();
    Complex mi_over_hbar(0.0, -1.0 / model.hbar);
    double drift = (mi_over_hbar * detail::rayleigh(psi, OH)).real() -
                   0.5 * u.lambda * detail::rayleigh(psi, LLO).real();
    double D = u.xi_R * (detail::rayleigh(psi, OL_anti).real() - 2.0 * o * l) +
               (Complex(0.0, u.xi_I) * detail::rayleigh(psi, OL_comm)).real();
    double dW = trajectory.noise.increments[k];
    double d_o = drift * dt + sl * D * dW;
    if (power == 1) {
      res[k] = (o_next - o) - d_o;
    } else {
      res[k] = (o_next * o_next - o * o) - (2.0 * o * d_o + u.lambda * D * D * dt);
    }
  }
  return res;
}

double rms(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s / static_cast<double>(values.size()));
}

}  // namespace unravel
