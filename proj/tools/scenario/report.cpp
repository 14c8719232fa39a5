#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "scenario.hpp"

namespace unravel::cli {

using nlohmann::json;

namespace {

constexpr double kReproduceTol = 1e-12;
constexpr double kIdentityTol = 1e-6;
constexpr double kRiccatiTol = 1e-2;

struct Checker {
  const SeriesOutput& s;
  std::vector<Check>& out;

  void add(const std::string& what, bool ok, double observed, double expected, double tol,
           const std::string& detail = {}) {
    out.push_back({s.name + ": " + what, ok, observed, expected, tol, detail});
  }

  // Largest |value| where value should be <= 0, with the time of the worst row.
  void at_most(const std::string& what, const std::vector<double>& excess, double tol) {
    double worst = -INFINITY;
    std::size_t at = 0;
    for (std::size_t i = 0; i < excess.size(); ++i)
      if (!(excess[i] <= worst)) {
        worst = excess[i];
        at = i;
      }
    std::ostringstream d;
    if (!excess.empty()) d << "worst at t = " << s.t.at(std::min(at, s.t.size() - 1));
    add(what, excess.empty() || worst <= tol, excess.empty() ? 0.0 : worst, 0.0, tol, d.str());
  }
};

double rel(double a, double b) {
  double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

void check_finite(Checker& c) {
  std::size_t bad = 0;
  for (double v : c.s.t) bad += std::isfinite(v) ? 0 : 1;
  for (const auto& col : c.s.data)
    for (double v : col) bad += std::isfinite(v) ? 0 : 1;
  c.add("all values finite", bad == 0, static_cast<double>(bad), 0.0, 0.0, "count of non-finite entries");
}

void check_mechanical_sigma(Checker& c, const ScenarioConfig& cfg) {
  const auto& A = c.s.column("sigma_A");
  const auto& B = c.s.column("sigma_B");
  const auto& V = c.s.column("var");
  const double s0 = 1.0 / (4.0 * cfg.a0.real());
  if (!c.s.t.empty() && c.s.t[0] == 0.0) {
    double dev = std::max({std::abs(A[0] - s0), std::abs(B[0] - s0), std::abs(V[0] - s0)});
    c.add("initial spreads equal 1/(4 Re a0)", dev == 0.0, dev, 0.0, 0.0, "max |value(0) - 1/(4 Re a0)|");
  }
  std::vector<double> e(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    double t = c.s.t[i];
    e[i] = std::max({rel(A[i], sigma_x(t, cfg.mech, cfg.a0, Unraveling::nonlinear)),
                     rel(B[i], sigma_x(t, cfg.mech, cfg.a0, Unraveling::linear)), rel(V[i], var_x(t, cfg.mech, cfg.a0))});
  }
  c.at_most("columns reproduce the closed forms", e, kReproduceTol);
  if (cfg.model == ModelKind::free_particle && cfg.a0.imag() == 0.0) {
    std::vector<double> o(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) o[i] = std::max(A[i] - B[i], B[i] - V[i]) / V[i];
    c.at_most("ordering sigma_A <= sigma_B <= var", o, 1e-12);
  }
}

void check_var(Checker& c, const ScenarioConfig& cfg) {
  const auto& V = c.s.column("var");
  const auto& M = c.s.column("mean_x");
  const auto& nl = c.s.column("mean_square_nonlinear");
  const auto& li = c.s.column("mean_square_linear");
  const auto& A = c.s.column("sigma_A");
  const auto& B = c.s.column("sigma_B");
  std::vector<double> en(V.size()), el(V.size()), ev(V.size());
  for (std::size_t i = 0; i < V.size(); ++i) {
    en[i] = rel(V[i], nl[i] - M[i] * M[i] + A[i]);
    el[i] = rel(V[i], li[i] - M[i] * M[i] + B[i]);
    ev[i] = rel(V[i], var_x(c.s.t[i], cfg.mech, cfg.a0));
  }
  c.at_most("var = E[<x>^2] - E[<x>]^2 + sigma_A", en, kIdentityTol);
  c.at_most("var = E[<x>^2] - E[<x>]^2 + sigma_B", el, kIdentityTol);
  c.at_most("var reproduces the closed form", ev, kReproduceTol);
  if (cfg.model == ModelKind::harmonic) {
    const auto& L = c.s.column("var_literal");
    std::vector<double> e(V.size());
    for (std::size_t i = 0; i < V.size(); ++i) e[i] = rel(V[i], L[i]);
    c.at_most("var matches the k-parametrized form", e, kIdentityTol);
  }
}

void check_riccati(Checker& c) {
  for (const char* col : {"residual_A", "residual_B", "residual_var"}) {
    const auto& r = c.s.column(col);
    std::vector<double> v(r.begin(), r.end());
    c.at_most(std::string(col) + " below tolerance", v, kRiccatiTol);
  }
}

void check_spin_trajectory(Checker& c) {
  std::vector<double> e;
  for (const auto& col : c.s.data)
    for (std::size_t i = 0; i < col.size(); ++i) e.push_back(std::abs(col[i]) - 1.0);
  c.at_most("|<sigma_z>| <= 1", e, 1e-12);
}

void check_mech_trajectory(Checker& c) {
  const auto& a = c.s.column("a_re");
  std::vector<double> e(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) e[i] = -a[i];
  c.at_most("Re a_t > 0", e, 0.0);
}

void check_spin_mean(Checker& c, const ScenarioConfig& cfg) {
  const double tol = 5.0 / std::sqrt(static_cast<double>(cfg.n_trajectories));
  std::vector<double> e(c.s.t.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    e[i] = std::max({std::abs(c.s.column("rho_00")[i] - c.s.column("lindblad_rho_00")[i]),
                     std::abs(c.s.column("rho_01_re")[i] - c.s.column("lindblad_rho_01_re")[i]),
                     std::abs(c.s.column("rho_01_im")[i] - c.s.column("lindblad_rho_01_im")[i])});
  c.at_most("E[rho] within 5/sqrt(N) of the Lindblad solution", e, tol);
}

void check_mech_mean(Checker& c) {
  const auto& mc = c.s.column("mc_mean_square");
  const auto& se = c.s.column("mc_standard_error");
  const auto& ex = c.s.column("mean_square");
  if (mc.empty()) return;
  std::size_t k = mc.size() - 1;
  double z = se[k] > 0.0 ? std::abs(mc[k] - ex[k]) / se[k] : (mc[k] == ex[k] ? 0.0 : INFINITY);
  c.add("final E[<x>^2] within 4 standard errors", z <= 4.0, z, 0.0, 4.0, "in units of the standard error");
}

void check_spin_sigma(Checker& c, const ScenarioConfig& cfg) {
  const auto& m = c.s.column("mean_sigma");
  std::vector<double> e(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) e[i] = std::max(-m[i], m[i] - 1.0);
  c.at_most("0 <= E[Sigma] <= 1", e, 1e-12);
  if (cfg.unraveling.kind == UnravelingChoice::Kind::nonlinear) {
    const auto& se = c.s.column("se_sigma");
    const auto& b = c.s.column("bound");
    std::vector<double> x(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) x[i] = m[i] - b[i] - 4.0 * se[i];
    c.at_most("E[Sigma] below the collapse bound (4 SE)", x, 1e-12);
  }
}

void check_collapse(Checker& c, const ScenarioConfig& cfg) {
  const double up = c.s.column("n_up").at(0), down = c.s.column("n_down").at(0),
               un = c.s.column("n_unresolved").at(0);
  const double n = static_cast<double>(cfg.n_trajectories);
  c.add("counts add up to the ensemble size", up + down + un == n, up + down + un, n, 0.0);
  const bool collapsing =
      cfg.unraveling.kind == UnravelingChoice::Kind::nonlinear && cfg.spin.lambda * cfg.t_final >= 10.0;
  if (!collapsing) return;
  const double p = c.s.column("born_p_up").at(0);
  const double sd = std::sqrt(p * (1.0 - p) / n);
  const double observed = c.s.column("fraction_up").at(0);
  c.add("fraction up within 3 binomial SD of the Born weight", std::abs(observed - p) <= 3.0 * sd + 1e-12, observed, p,
        3.0 * sd);
  if (n >= 100) c.add("unresolved fraction below 1%", un / n < 0.01, un / n, 0.0, 0.01);
}

void check_bell(Checker& c) {
  double d = c.s.column("rho_distance").at(0);
  double g = c.s.column("sigma_gap").at(0);
  c.add("Bob's density matrix independent of Alice's basis", d <= 1e-15, d, 0.0, 1e-15);
  c.add("sigma gap is 1", std::abs(g - 1.0) <= 1e-15, g, 1.0, 1e-15);
  bool has_dyn = std::find(c.s.columns.begin(), c.s.columns.end(), "dyn_rho_distance") != c.s.columns.end();
  if (!has_dyn) return;
  double dd = c.s.column("dyn_rho_distance").at(0), tol = c.s.column("dyn_tolerance").at(0);
  c.add("unravelings agree on the ensemble state", dd <= tol, dd, 0.0, tol);
  double gap = std::abs(c.s.column("dyn_mean_sigma_nonlinear").at(0) - c.s.column("dyn_mean_sigma_linear").at(0));
  c.add("unravelings differ in E[Sigma]", gap > 0.5, gap, 0.5, 0.0, "requires gap > 0.5");
}

}  // namespace

bool Report::passed() const {
  if (checks.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

json Report::to_json() const {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"observed", c.observed},
                   {"expected", c.expected},
                   {"tolerance", c.tolerance},
                   {"detail", c.detail}});
  return {{"passed", passed()}, {"checks", arr}};
}

std::string Report::to_text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    char buf[160];
    std::snprintf(buf, sizeof buf, " observed=%.6g expected=%.6g tol=%.3g", c.observed, c.expected, c.tolerance);
    os << (c.passed ? "PASS " : "FAIL ") << c.name << buf;
    if (!c.detail.empty()) os << " (" << c.detail << ")";
    os << "\n";
  }
  os << (passed() ? "report: all checks passed" : "report: FAILED") << "\n";
  return os.str();
}

Report report(const std::vector<SeriesOutput>& outputs) {
  Report r;
  if (outputs.empty()) {
    r.checks.push_back({"outputs", false, 0.0, 1.0, 0.0, "no outputs to check"});
    return r;
  }
  for (const auto& s : outputs) {
    Checker c{s, r.checks};
    if (s.t.empty()) {
      c.add("series is non-empty", false, 0.0, 1.0, 0.0);
      continue;
    }
    ScenarioConfig cfg;
    try {
      cfg = parse_config(s.metadata.at("config"));
    } catch (const std::exception& e) {
      c.add("metadata carries a valid config", false, 0.0, 0.0, 0.0, e.what());
      continue;
    }
    try {
      check_finite(c);
      const bool spin = cfg.model == ModelKind::spin;
      switch (s.kind) {
        case OutputKind::sigma: spin ? check_spin_sigma(c, cfg) : check_mechanical_sigma(c, cfg); break;
        case OutputKind::var: check_var(c, cfg); break;
        case OutputKind::riccati: check_riccati(c); break;
        case OutputKind::trajectory: spin ? check_spin_trajectory(c) : check_mech_trajectory(c); break;
        case OutputKind::ensemble_mean: spin ? check_spin_mean(c, cfg) : check_mech_mean(c); break;
        case OutputKind::collapse_stats: check_collapse(c, cfg); break;
        case OutputKind::bell: check_bell(c); break;
        case OutputKind::record: break;
      }
    } catch (const std::exception& e) {
      c.add("series has the expected layout", false, 0.0, 0.0, 0.0, e.what());
    }
  }
  return r;
}

}  // namespace unravel::cli
