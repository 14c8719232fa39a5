#include "unravel/gaussian_dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "unravel/sde_engine.hpp"

namespace unravel {

namespace {

constexpr Complex kI(0.0, 1.0);

double lambda_eff(const MechanicalParams& p, Unraveling u) { return u == Unraveling::nonlinear ? p.lambda : 0.0; }

// sqrt(r - x) and sqrt(r + x) for r = hypot(x, y), x >= 0, without cancellation.
std::pair<double, double> half_angle_roots(double x, double y) {
  double r = std::hypot(x, y);
  double plus = r + x;
  double minus = plus > 0.0 ? (y * y) / plus : 0.0;
  return {std::sqrt(minus), std::sqrt(plus)};
}

struct Simpson {
  std::function<double(double)> f;
  double tol;
  int max_depth;
  int evaluations = 0;

  double whole(double a, double b, double fa, double fm, double fb) const { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

  double recurse(double a, double b, double fa, double fm, double fb, double s, double eps, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    evaluations += 2;
    double left = whole(a, m, fa, flm, fm);
    double right = whole(m, b, fm, frm, fb);
    double delta = left + right - s;
    if (depth <= 0) throw std::runtime_error("mean_square_x: quadrature did not converge");
    if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return recurse(a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
  }

  double integrate(double a, double b) {
    if (b == a) return 0.0;
    // Panels graded geometrically toward a: the collapse integrands spike
    // there on a time scale many decades below b - a.
    constexpr int kLevels = 100;
    std::vector<double> edges{a};
    for (int j = kLevels; j >= 0; --j) edges.push_back(a + (b - a) * std::ldexp(1.0, -j));
    const std::size_t np = edges.size() - 1;
    std::vector<std::array<double, 3>> fv(np);
    std::vector<double> est(np);
    double coarse = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      double pa = edges[i], pb = edges[i + 1];
      fv[i] = {f(pa), f(0.5 * (pa + pb)), f(pb)};
      est[i] = whole(pa, pb, fv[i][0], fv[i][1], fv[i][2]);
      coarse += std::abs(est[i]);
    }
    double eps = tol * std::max(coarse, 1e-300) / static_cast<double>(np);
    double total = 0.0;
    for (std::size_t i = 0; i < np; ++i)
      total += recurse(edges[i], edges[i + 1], fv[i][0], fv[i][1], fv[i][2], est[i], eps, max_depth);
    return total;
  }
};

double integrate(std::function<double(double)> f, double a, double b) {
  Simpson s{std::move(f), kTol.quadrature_relative, 40};
  return s.integrate(a, b);
}

}  // namespace

void MechanicalParams::validate() const {
  if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("mass must be positive");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw std::invalid_argument("omega must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw std::invalid_argument("hbar must be positive");
}

Complex atanh_accurate(Complex z) {
  double x = z.real(), y = z.imag();
  double r2 = x * x + y * y;
  double re = 0.25 * (std::log1p(2.0 * x + r2) - std::log1p(-2.0 * x + r2));
  double im = 0.5 * std::atan2(2.0 * y, (1.0 - x) * (1.0 + x) - y * y);
  return {re, im};
}

SpreadConstants spread_constants(const MechanicalParams& p, Complex a0, Unraveling u) {
  p.validate();
  if (!(a0.real() > 0.0) || !std::isfinite(a0.real()) || !std::isfinite(a0.imag()))
    throw std::invalid_argument("spread_constants: a0 must have positive real part");
  SpreadConstants sc;
  sc.a0 = a0;
  sc.hbar_over_m = p.hbar / p.m;
  const double lam = lambda_eff(p, u);
  if (lam == 0.0 && p.omega == 0.0) {
    sc.profile = SpreadProfile::ballistic;
    return sc;
  }
  if (p.omega == 0.0) {
    double s = std::sqrt(p.hbar * lam / p.m);
    sc.b = Complex(1.0, 1.0) * s;
    sc.c = Complex(1.0, -1.0) * 0.5 * std::sqrt(p.m * lam / p.hbar);
  } else if (lam == 0.0) {
    sc.b = Complex(0.0, p.omega);
    sc.c = p.m * p.omega / (2.0 * p.hbar);
  } else {
    double xa = p.m * p.m * p.omega * p.omega / (4.0 * p.hbar * p.hbar);
    double ya = p.m * lam / (2.0 * p.hbar);
    auto [rm, rp] = half_angle_roots(xa, ya);  // sqrt(r - xa), sqrt(r + xa)
    sc.b = Complex(p.hbar / p.m * std::sqrt(2.0) * rm, p.hbar / p.m * std::sqrt(2.0) * rp);
    sc.c = Complex(std::sqrt(0.5) * rp, -std::sqrt(0.5) * rm);
  }
  if (a0 == sc.c) throw std::domain_error("spread_constants: a0 equals c, tanh^{-1}(a0/c) is singular");
  sc.k = atanh_accurate(a0 / sc.c);
  return sc;
}

Complex a_closed_form(double t, const SpreadConstants& sc) {
  if (!(t >= 0.0)) throw std::invalid_argument("a_closed_form: t must be >= 0");
  if (t == 0.0) return sc.a0;
  if (sc.profile == SpreadProfile::ballistic) {
    Complex den = 1.0 + 2.0 * kI * sc.hbar_over_m * sc.a0 * t;
    return sc.a0 / den;
  }
  double X = sc.b.real() * t + sc.k.real();
  double Y = sc.b.imag() * t + sc.k.imag();
  // tanh(X + iY) = (sinh 2X + i sin 2Y) / (cosh 2X + cos 2Y), rewritten with
  // s = tanh X and q = sech^2 X so that large X neither overflows nor cancels.
  double s = std::tanh(X);
  double ch = std::cosh(X);
  double q = std::isfinite(ch) ? 1.0 / (ch * ch) : 0.0;
  double sy = std::sin(Y), cy = std::cos(Y);
  double den = s * s + cy * cy * q;
  if (!(den > 0.0)) throw std::domain_error("a_closed_form: vanishing denominator");
  double re_t = s / den;
  double im_t = sy * cy * q / den;
  const Complex c = sc.c;
  return {c.real() * re_t - c.imag() * im_t, c.imag() * re_t + c.real() * im_t};
}

Complex a_rhs(Complex a, const MechanicalParams& p, Unraveling u) {
  return lambda_eff(p, u) + kI * (p.m * p.omega * p.omega / (2.0 * p.hbar)) - 2.0 * kI * (p.hbar / p.m) * a * a;
}

double sigma_x(double t, const MechanicalParams& p, Complex a0, Unraveling u) {
  SpreadConstants sc = spread_constants(p, a0, u);
  if (sc.profile == SpreadProfile::ballistic) {
    // Same as 1/(4 a_t^R) for the ballistic profile, arranged so t = 0 is exact.
    double u1 = 1.0 - 2.0 * sc.hbar_over_m * t * a0.imag();
    double u2 = 2.0 * sc.hbar_over_m * t * a0.real();
    return (u1 * u1 + u2 * u2) / (4.0 * a0.real());
  }
  double aR = a_closed_form(t, sc).real();
  if (!(aR > 0.0)) throw std::domain_error("sigma_x: non-positive width parameter");
  return 1.0 / (4.0 * aR);
}

double sigma_x_free_nonlinear_literal(double t, const MechanicalParams& p, Complex a0) {
  MechanicalParams q = p;
  q.omega = 0.0;
  SpreadConstants sc = spread_constants(q, a0, Unraveling::nonlinear);
  double X2 = 2.0 * (sc.b.real() * t + sc.k.real());
  double Y2 = 2.0 * (sc.b.imag() * t + sc.k.imag());
  return 0.25 * (std::cosh(X2) + std::cos(Y2)) / (sc.c.real() * std::sinh(X2) - sc.c.imag() * std::sin(Y2));
}

double sigma_x_free_linear_literal(double t, const MechanicalParams& p, Complex a0) {
  double hm = p.hbar * t;
  double n = (p.m - 2.0 * hm * a0.imag()) * (p.m - 2.0 * hm * a0.imag()) + 4.0 * hm * hm * a0.real() * a0.real();
  return 0.25 * n / (p.m * p.m * a0.real());
}

double var_x(double t, const MechanicalParams& p, Complex a0) {
  p.validate();
  double base = sigma_x(t, p, a0, Unraveling::linear);
  const double h2 = p.hbar * p.hbar;
  if (p.omega == 0.0) return base + p.lambda * h2 * t * t * t / (3.0 * p.m * p.m);
  const double w = p.omega;
  return base + p.lambda * h2 / (2.0 * p.m * p.m * w * w) * (t - std::sin(2.0 * w * t) / (2.0 * w));
}

double var_x_harmonic_literal(double t, const MechanicalParams& p, Complex a0) {
  p.validate();
  if (p.omega == 0.0) throw std::invalid_argument("var_x_harmonic_literal: needs omega > 0");
  const double c = p.m * p.omega / (2.0 * p.hbar);
  const double den = (c - a0.real()) * (c - a0.real()) + a0.imag() * a0.imag();
  const double xv = (c * c - std::norm(a0)) / den;
  const double yv = 2.0 * a0.imag() * c / den;
  // 1/4 log(xv^2 + yv^2) = Re atanh(a0/c); the latter survives xv -> 1.
  const double kR = atanh_accurate(a0 / c).real();
  const double kI = 0.5 * std::atan2(yv, xv);
  const double w = p.omega;
  return p.hbar / (2.0 * p.m * w) * (std::cosh(2.0 * kR) + std::cos(2.0 * (w * t + kI))) / std::sinh(2.0 * kR) +
         p.lambda * p.hbar * p.hbar / (2.0 * p.m * p.m * w * w) * (t - std::sin(2.0 * w * t) / (2.0 * w));
}

double ballistic_mean(double t, const MechanicalParams& p, double x_bar0, double k_bar0) {
  if (p.omega == 0.0) return x_bar0 + p.hbar / p.m * k_bar0 * t;
  return p.hbar / (p.m * p.omega) * k_bar0 * std::sin(p.omega * t) + x_bar0 * std::cos(p.omega * t);
}

double mean_square_x(double t, const MechanicalParams& p, Complex a0, double x_bar0, double k_bar0, Unraveling u) {
  p.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("mean_square_x: t must be >= 0");
  double mean = ballistic_mean(t, p, x_bar0, k_bar0);
  if (t == 0.0 || p.lambda == 0.0) return mean * mean;
  const double hm = p.hbar / p.m;
  const double lam = p.lambda;
  const double w = p.omega;
  double noise = 0.0;
  if (u == Unraveling::linear) {
    if (w == 0.0) {
      noise = integrate([&](double s) { return lam * hm * hm * (t - s) * (t - s); }, 0.0, t);
    } else {
      noise = integrate(
          [&](double s) {
            double v = std::sqrt(lam) * hm * std::sin(w * (s - t)) / w;
            return v * v;
          },
          0.0, t);
    }
  } else {
    SpreadConstants sc = spread_constants(p, a0, u);
    if (w == 0.0) {
      noise = integrate(
          [&](double s) {
            Complex a = a_closed_form(s, sc);
            double v = (hm * (t - s) * a.imag() - 0.5) / a.real();
            return lam * v * v;
          },
          0.0, t);
    } else {
      noise = integrate(
          [&](double s) {
            Complex a = a_closed_form(s, sc);
            double v = (2.0 * a.imag() * hm * std::sin(w * (s - t)) + w * std::cos(w * (s - t))) / (2.0 * a.real() * w);
            return lam * v * v;
          },
          0.0, t);
    }
  }
  return mean * mean + noise;
}

double gaussian_stiffness(const MechanicalParams& p, Complex a0) {
  p.validate();
  double rate = std::sqrt(2.0 * p.hbar * p.lambda / p.m);  // |b| of the free collapse profile
  rate = std::max(rate, p.omega);
  rate = std::max(rate, 2.0 * p.hbar * std::abs(a0) / p.m);
  return rate;
}

void check_gaussian_budget(const MechanicalParams& p, Complex a0, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive and finite");
  double rate = gaussian_stiffness(p, a0);
  if (rate * dt > kTol.stability_budget * (1.0 + 1e-12)) {
    double max_dt = kTol.stability_budget / rate;
    throw StabilityError("stability budget violated: rate*dt = " + std::to_string(rate * dt) + "; use dt <= " +
                             std::to_string(max_dt),
                         max_dt);
  }
}

GaussianState gaussian_sde_step(const GaussianState& g, const MechanicalParams& p, Unraveling u, double dW,
                                double dt) {
  if (!(g.a.real() > 0.0)) throw std::invalid_argument("gaussian_sde_step: a.re must be positive");
  const double hm = p.hbar / p.m;
  const double sl = std::sqrt(p.lambda);
  const double aR = g.a.real(), aI = g.a.imag();
  GaussianState out;
  out.a = g.a + a_rhs(g.a, p, u) * dt;
  if (u == Unraveling::nonlinear) {
    out.x_bar = g.x_bar + hm * g.k_bar * dt + sl / (2.0 * aR) * dW;
    out.k_bar = g.k_bar - p.m * p.omega * p.omega / p.hbar * g.x_bar * dt - sl * aI / aR * dW;
  } else {
    out.x_bar = g.x_bar + hm * g.k_bar * dt;
    out.k_bar = g.k_bar - p.m * p.omega * p.omega / p.hbar * g.x_bar * dt - sl * dW;
  }
  if (!(out.a.real() > 0.0) || !std::isfinite(out.a.real()) || !std::isfinite(out.a.imag()))
    throw NumericalError("gaussian_sde_step: width parameter left the normalizable region; reduce dt");
  return out;
}

RiccatiMatrices riccati_matrices(const MechanicalParams& p, RiccatiKind which) {
  p.validate();
  RiccatiMatrices r;
  r.alpha = {{{0.0, 1.0 / p.m}, {-p.m * p.omega * p.omega, 0.0}}};
  switch (which) {
    case RiccatiKind::nonlinear:
      r.beta[0][1] = 2.0 * std::sqrt(p.lambda);
      r.delta[1][1] = p.lambda * p.hbar * p.hbar;
      break;
    case RiccatiKind::linear:
      break;
    case RiccatiKind::variance:
      r.delta[1][1] = p.lambda * p.hbar * p.hbar;
      break;
  }
  return r;
}

CovarianceMatrix covariance_from_width(Complex a, double hbar) {
  if (!(a.real() > 0.0)) throw std::invalid_argument("covariance_from_width: a.re must be positive");
  return {1.0 / (4.0 * a.real()), -hbar * a.imag() / (2.0 * a.real()), hbar * hbar * std::norm(a) / a.real()};
}

CovarianceMatrix sigma_matrix(double t, const MechanicalParams& p, Complex a0, Unraveling u) {
  SpreadConstants sc = spread_constants(p, a0, u);
  return covariance_from_width(a_closed_form(t, sc), p.hbar);
}

CovarianceMatrix var_matrix(double t, const MechanicalParams& p, Complex a0) {
  CovarianceMatrix s = sigma_matrix(t, p, a0, Unraveling::linear);
  const double lh2 = p.lambda * p.hbar * p.hbar;
  const double w = p.omega;
  if (w == 0.0) {
    s.sxx += lh2 * t * t * t / (3.0 * p.m * p.m);
    s.sxp += lh2 * t * t / (2.0 * p.m);
    s.spp += lh2 * t;
  } else {
    double sn = std::sin(w * t);
    s.sxx += lh2 / (p.m * p.m * w * w) * (0.5 * t - std::sin(2.0 * w * t) / (4.0 * w));
    s.sxp += lh2 * sn * sn / (2.0 * p.m * w * w);
    s.spp += lh2 * (0.5 * t + std::sin(2.0 * w * t) / (4.0 * w));
  }
  return s;
}

CovarianceMatrix riccati_rhs(const CovarianceMatrix& cs, const RiccatiMatrices& mats) {
  Mat2 S = cs.as_matrix();
  const Mat2& A = mats.alpha;
  const Mat2& B = mats.beta;
  Mat2 BBt{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) BBt[i][j] = B[i][0] * B[j][0] + B[i][1] * B[j][1];
  Mat2 out{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double v = mats.delta[i][j];
      for (int k = 0; k < 2; ++k) v += A[i][k] * S[k][j] + S[i][k] * A[j][k];
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) v -= S[i][k] * BBt[k][l] * S[l][j];
      out[i][j] = v;
    }
  return {out[0][0], 0.5 * (out[0][1] + out[1][0]), out[1][1]};
}

std::vector<double> riccati_residual(std::span<const CovarianceMatrix> series, const RiccatiMatrices& mats,
                                     double dt) {
  if (series.size() < 3) throw std::invalid_argument("riccati_residual: need at least 3 grid points");
  if (!(dt > 0.0)) throw std::invalid_argument("riccati_residual: dt must be positive");
  const std::size_t n = series.size();
  std::vector<CovarianceMatrix> rhs(n);
  std::array<double, 3> scale{0.0, 0.0, 0.0};
  std::array<double, 3> value_scale{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    rhs[k] = riccati_rhs(series[k], mats);
    scale[0] = std::max(scale[0], std::abs(rhs[k].sxx));
    scale[1] = std::max(scale[1], std::abs(rhs[k].sxp));
    scale[2] = std::max(scale[2], std::abs(rhs[k].spp));
    value_scale[0] = std::max(value_scale[0], std::abs(series[k].sxx));
    value_scale[1] = std::max(value_scale[1], std::abs(series[k].sxp));
    value_scale[2] = std::max(value_scale[2], std::abs(series[k].spp));
  }
  // A component that never moves is measured against its size per unit time.
  const double span = dt * static_cast<double>(n - 1);
  for (int c = 0; c < 3; ++c) {
    scale[c] = std::max(scale[c], value_scale[c] / span);
    if (scale[c] == 0.0) scale[c] = 1.0;
  }
  std::vector<double> res(n - 2);
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    double dxx = (series[k + 1].sxx - series[k - 1].sxx) / (2.0 * dt);
    double dxp = (series[k + 1].sxp - series[k - 1].sxp) / (2.0 * dt);
    double dpp = (series[k + 1].spp - series[k - 1].spp) / (2.0 * dt);
    double r = std::max({std::abs(dxx - rhs[k].sxx) / scale[0], std::abs(dxp - rhs[k].sxp) / scale[1],
                         std::abs(dpp - rhs[k].spp) / scale[2]});
    res[k - 1] = r;
    worst = std::max(worst, r);
  }
  if (worst > 0.5)
    throw std::invalid_argument("riccati_residual: grid too coarse, differencing error dominates (max residual " +
                                std::to_string(worst) + ")");
  return res;
}

namespace presets {
MechanicalParams fig1() { return {1e-15, 0.0, 1e23, kHbarSI}; }
MechanicalParams fig3() { return {1e-15, 1e4, 1e23, kHbarSI}; }
MechanicalParams harmonic() { return fig3(); }
double harmonic_a0() {
  MechanicalParams p = harmonic();
  return 0.5 * p.m * p.omega / (2.0 * p.hbar);
}
}  // namespace presets

}  // namespace unravel
