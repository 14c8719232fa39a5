#include "unravel/gcm_kraus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace unravel {

namespace {

// Diagonal of A(dy) in the eigenbasis of L.
std::vector<Complex> kraus_diagonal(const std::vector<double>& eig, const GcmParams& gp, double dy, double dt,
                                    double norm_constant) {
  std::vector<Complex> out(eig.size());
  for (std::size_t j = 0; j < eig.size(); ++j) {
    Complex u = gp.c * dy - gp.d * eig[j] * dt;
    out[j] = norm_constant * std::exp(-(gp.gamma / dt) * u * u);
  }
  return out;
}

void check_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
}

// Trapezoid weights on a uniform grid.
double trapezoid_weight(std::size_t i, std::size_t n, double h) { return (i == 0 || i + 1 == n) ? 0.5 * h : h; }

}  // namespace

GcmParams solve_gcm_params(Complex xi, double gamma) {
  const double xr = xi.real(), xim = xi.imag();
  if (!(xr > 0.0)) throw std::invalid_argument("solve_gcm_params: xi_R must be > 0 (xi_R = 0 has no measurement form)");
  if (std::abs(std::norm(xi) - 1.0) > kTol.xi_modulus) throw std::invalid_argument("solve_gcm_params: |xi| must be 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("solve_gcm_params: gamma must be > 0");
  GcmParams gp;
  gp.xi = xi;
  gp.gamma = gamma;
  gp.b = 1.0;
  gp.a = gp.b * xr;
  double dR = std::sqrt(0.5 * xr * xr + 0.5 * std::sqrt(xim * xim * xr * xr + xr * xr * xr * xr));
  double dI = xr * xim / (2.0 * dR);
  gp.d = Complex(dR, dI);
  double d2 = dR * dR + dI * dI;
  gp.c = Complex((xr * dR + xim * dI) / (gp.b * d2), (xim * dR - xr * dI) / (gp.b * d2));
  return gp;
}

double kraus_norm_squared(const GcmParams& gp, double dt, KrausNormalization norm) {
  check_dt(dt);
  const Complex c2 = gp.c * gp.c;
  if (norm == KrausNormalization::povm) return std::sqrt(2.0 * gp.gamma * c2.real() / (std::numbers::pi * dt));
  const double cr = gp.c.real(), ci = gp.c.imag();
  return std::sqrt(2.0 * gp.gamma / (std::numbers::pi * dt)) * std::pow(cr * cr - ci * ci, 1.5) /
         (cr * gp.d.real() - ci * gp.d.imag());
}

KrausOperator kraus_operator(const HermitianOperator& L, const GcmParams& gp, double dy, double dt,
                             KrausNormalization norm) {
  check_dt(dt);
  Eigensystem es = eigh(L.matrix());
  KrausOperator k;
  k.dy = dy;
  k.dt = dt;
  k.norm_constant = std::sqrt(kraus_norm_squared(gp, dt, norm));
  std::vector<Complex> diag = kraus_diagonal(es.values, gp, dy, dt, k.norm_constant);
  k.matrix = es.vectors * Matrix::diagonal(diag) * es.vectors.adjoint();
  return k;
}

KrausResult kraus_apply(const StateVector& psi, const HermitianOperator& L, const GcmParams& gp, double dy, double dt,
                        KrausNormalization norm) {
  if (psi.dim() != L.dim()) throw DimensionError("kraus_apply: dimension mismatch");
  KrausOperator k = kraus_operator(L, gp, dy, dt, norm);
  KrausResult r;
  r.state = k.matrix * psi;
  r.weight = r.state.norm2();
  return r;
}

double outcome_sigma(const GcmParams& gp, double dt) {
  check_dt(dt);
  return std::sqrt(dt / (4.0 * gp.gamma));
}

std::vector<double> outcome_grid(const HermitianOperator& L, const GcmParams& gp, double dt, std::size_t n) {
  if (n < 3) throw std::invalid_argument("outcome_grid: need at least 3 points");
  auto ev = eigenvalues(L.matrix());
  double sigma = outcome_sigma(gp, dt);
  // Outcome density for eigenvalue l is centred at Re(cd)/Re(c^2) l dt = a l dt.
  double lo = gp.a * ev.front() * dt - 8.0 * sigma;
  double hi = gp.a * ev.back() * dt + 8.0 * sigma;
  std::vector<double> g(n);
  double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + h * static_cast<double>(i);
  return g;
}

RecordMeanStatistic record_mean_check(const StateVector& psi, const HermitianOperator& L, const GcmParams& gp,
                                      double dt, std::size_t n_samples) {
  if (psi.dim() != L.dim()) throw DimensionError("record_mean_check: dimension mismatch");
  if (!psi.is_normalized(kTol.stored_normalization)) throw std::invalid_argument("record_mean_check: state not normalized");
  Eigensystem es = eigh(L.matrix());
  // Weights |<e_j|psi>|^2 in the L eigenbasis.
  std::vector<double> pj(es.values.size());
  for (std::size_t j = 0; j < pj.size(); ++j) {
    Complex amp = 0.0;
    for (std::size_t i = 0; i < psi.dim(); ++i) amp += std::conj(es.vectors(i, j)) * psi[i];
    pj[j] = std::norm(amp);
  }
  auto grid = outcome_grid(L, gp, dt, n_samples);
  const double h = grid[1] - grid[0];
  const double n_povm = std::sqrt(kraus_norm_squared(gp, dt, KrausNormalization::povm));
  const double n_first = std::sqrt(kraus_norm_squared(gp, dt, KrausNormalization::first_moment));
  RecordMeanStatistic st;
  double mean_unit = 0.0, total_unit = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto diag = kraus_diagonal(es.values, gp, grid[i], dt, 1.0);
    double w = 0.0;
    for (std::size_t j = 0; j < pj.size(); ++j) w += pj[j] * std::norm(diag[j]);
    double tw = trapezoid_weight(i, grid.size(), h);
    total_unit += tw * w;
    mean_unit += tw * w * grid[i];
  }
  st.total_povm = n_povm * n_povm * total_unit;
  st.mean_povm = n_povm * n_povm * mean_unit;
  st.total_first_moment = n_first * n_first * total_unit;
  st.mean_first_moment = n_first * n_first * mean_unit;
  double l_mean = 0.0;
  for (std::size_t j = 0; j < pj.size(); ++j) l_mean += pj[j] * es.values[j];
  st.expected_xi_R = gp.xi.real() * l_mean * dt;
  st.expected_plain = l_mean * dt;
  st.gaussian_integral = gp.a * l_mean * dt;
  return st;
}

double povm_completeness(const HermitianOperator& L, const GcmParams& gp, double dt, std::size_t n) {
  Eigensystem es = eigh(L.matrix());
  auto grid = outcome_grid(L, gp, dt, n);
  const double h = grid[1] - grid[0];
  const double nc = std::sqrt(kraus_norm_squared(gp, dt, KrausNormalization::povm));
  std::vector<double> acc(es.values.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto diag = kraus_diagonal(es.values, gp, grid[i], dt, nc);
    double tw = trapezoid_weight(i, grid.size(), h);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += tw * std::norm(diag[j]);
  }
  // A^dagger A is diagonal in the L eigenbasis, so the deviation from I is too.
  double worst = 0.0;
  for (double a : acc) worst = std::max(worst, std::abs(a - 1.0));
  return worst;
}

Matrix kraus_channel_average(const DensityMatrix& rho, const HermitianOperator& L, const GcmParams& gp, double dt,
                             std::size_t n) {
  if (rho.dim() != L.dim()) throw DimensionError("kraus_channel_average: dimension mismatch");
  Eigensystem es = eigh(L.matrix());
  const std::size_t dim = L.dim();
  Matrix r = es.vectors.adjoint() * rho.matrix() * es.vectors;
  auto grid = outcome_grid(L, gp, dt, n);
  const double h = grid[1] - grid[0];
  const double nc = std::sqrt(kraus_norm_squared(gp, dt, KrausNormalization::povm));
  Matrix acc(dim);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto diag = kraus_diagonal(es.values, gp, grid[i], dt, nc);
    double tw = trapezoid_weight(i, grid.size(), h);
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = 0; k < dim; ++k) acc(j, k) += tw * diag[j] * std::conj(diag[k]);
  }
  Matrix out(dim);
  for (std::size_t j = 0; j < dim; ++j)
    for (std::size_t k = 0; k < dim; ++k) out(j, k) = acc(j, k) * r(j, k);
  return es.vectors * out * es.vectors.adjoint();
}

}  // namespace unravel
