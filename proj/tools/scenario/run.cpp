#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "scenario.hpp"
#include "unravel/bell_demo.hpp"

namespace unravel::cli {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxTrajectoryColumns = 100;

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= n || failed.load()) return;
      try {
        fn(k);
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
}

SeriesOutput make_output(const ScenarioConfig& cfg, OutputKind kind, std::vector<std::string> columns) {
  SeriesOutput s;
  s.kind = kind;
  s.name = cfg.name + "_" + to_string(kind);
  s.columns = std::move(columns);
  s.data.assign(s.columns.size(), {});
  s.metadata = {{"scenario", cfg.name},
                {"output", to_string(kind)},
                {"version", kVersion},
                {"seed", cfg.base_seed},
                {"config", cfg.to_json()},
                {"warnings", warnings(cfg)}};
  return s;
}

void push_row(SeriesOutput& s, double t, std::initializer_list<double> values) {
  s.t.push_back(t);
  std::size_t i = 0;
  for (double v : values) s.data.at(i++).push_back(v);
  if (i != s.columns.size()) throw std::logic_error("push_row: column count mismatch");
}

bool wants(const ScenarioConfig& cfg, OutputKind o) {
  return std::find(cfg.outputs.begin(), cfg.outputs.end(), o) != cfg.outputs.end();
}

std::vector<SeriesOutput> run_spin(const ScenarioConfig& cfg, const RunOptions& opts) {
  const ModelSpec model = spin_model(cfg.spin);
  const UnravelingParams u = cfg.unraveling.params(cfg.spin.lambda);
  const std::size_t n = cfg.n_steps();
  const StateVector psi0 = cfg.initial_state();
  const HermitianOperator sz = pauli(Axis::z);
  std::vector<SeriesOutput> out;

  std::vector<TrajectoryRecord> ens;
  const bool need_ensemble = wants(cfg, OutputKind::trajectory) || wants(cfg, OutputKind::ensemble_mean) ||
                             wants(cfg, OutputKind::sigma) || wants(cfg, OutputKind::collapse_stats);
  if (need_ensemble) {
    TrajectoryOptions to;
    to.observables = {sz};
    to.stride = cfg.output_every;
    to.keep_noise = false;
    to.keep_record = false;
    ens = simulate_ensemble(model, u, psi0, cfg.dt, n, cfg.base_seed, cfg.n_trajectories, to, opts.threads);
  }
  const std::vector<double> times = ens.empty() ? std::vector<double>{} : ens.front().times;

  for (OutputKind kind : cfg.outputs) {
    switch (kind) {
      case OutputKind::trajectory: {
        std::size_t nc = std::min(ens.size(), kMaxTrajectoryColumns);
        std::vector<std::string> cols;
        for (std::size_t k = 0; k < nc; ++k) cols.push_back("sz_" + std::to_string(k));
        SeriesOutput s = make_output(cfg, kind, cols);
        s.t = times;
        for (std::size_t k = 0; k < nc; ++k) s.data[k] = ens[k].conditional_means[0];
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::ensemble_mean: {
        SeriesOutput s = make_output(cfg, kind,
                                     {"mean_sz", "se_sz", "rho_00", "rho_01_re", "rho_01_im", "lindblad_sz",
                                      "lindblad_rho_00", "lindblad_rho_01_re", "lindblad_rho_01_im"});
        auto rho = ensemble_average(ens, times);
        auto ref = lindblad_evolve(DensityMatrix::pure(psi0), model, cfg.spin.lambda, cfg.dt / 10.0, times);
        const double nt = static_cast<double>(ens.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
          double s1 = 0.0, s2 = 0.0;
          for (const auto& tr : ens) {
            double m = tr.conditional_means[0][i];
            s1 += m;
            s2 += m * m;
          }
          double mean = s1 / nt;
          double var = nt > 1 ? std::max(0.0, (s2 - nt * mean * mean) / (nt - 1.0)) : 0.0;
          const Matrix& r = rho[i].matrix();
          const Matrix& l = ref[i].matrix();
          push_row(s, times[i],
                   {mean, std::sqrt(var / nt), r(0, 0).real(), r(0, 1).real(), r(0, 1).imag(),
                    expectation(ref[i], sz), l(0, 0).real(), l(0, 1).real(), l(0, 1).imag()});
        }
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::sigma: {
        SeriesOutput s = make_output(cfg, kind, {"mean_sigma", "se_sigma", "bound"});
        auto rep = supermartingale_check(ens, cfg.spin);
        for (const auto& row : rep.rows) push_row(s, row.t, {row.mean_sigma, row.standard_error, row.bound});
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::collapse_stats: {
        SeriesOutput s = make_output(cfg, kind,
                                     {"n_up", "n_down", "n_unresolved", "fraction_up", "born_p_up", "threshold"});
        CollapseReport c = collapse_statistics(ens, psi0);
        push_row(s, times.back(),
                 {static_cast<double>(c.n_up), static_cast<double>(c.n_down), static_cast<double>(c.n_unresolved),
                  c.fraction_up(), c.born_p_up, c.threshold});
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::record: {
        TrajectoryOptions to;
        to.stride = n;
        to.keep_noise = false;
        to.keep_record = true;
        auto tr = simulate_trajectory(model, u, psi0, cfg.dt, n, derive_seed(cfg.base_seed, 0), to);
        SeriesOutput s = make_output(cfg, kind, {"dy"});
        for (std::size_t k = 0; k < tr.record.values.size(); ++k)
          push_row(s, static_cast<double>(k) * cfg.dt, {tr.record.values[k]});
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::bell: {
        std::vector<std::string> cols{"rho_distance", "sigma_gap", "mean_sigma_z_basis", "mean_sigma_x_basis",
                                      "projective_z", "projective_x"};
        if (cfg.n_trajectories > 0)
          for (const char* c : {"dyn_rho_distance", "dyn_tolerance", "dyn_mean_sigma_nonlinear",
                                "dyn_mean_sigma_linear", "dyn_lindblad_distance"})
            cols.push_back(c);
        SeriesOutput s = make_output(cfg, kind, cols);
        BellOutcome z = alice_measures(Basis::z), x = alice_measures(Basis::x);
        SignalingGap g = signaling_gap(z, x);
        std::vector<double> row{g.rho_distance, g.sigma_gap, z.mean_sigma, x.mean_sigma,
                                projective_analogue(Axis::z), projective_analogue(Axis::x)};
        double t = 0.0;
        if (cfg.n_trajectories > 0) {
          DynamicalAnalogueOptions d;
          d.n_trajectories = cfg.n_trajectories;
          d.t_final = cfg.t_final;
          d.dt = cfg.dt;
          d.lambda = cfg.spin.lambda;
          d.nu = cfg.spin.nu;
          d.seed = cfg.base_seed;
          d.threads = opts.threads;
          DynamicalAnalogue a = dynamical_analogue(d);
          row.insert(row.end(), {a.rho_distance, a.tolerance, a.mean_sigma_nonlinear, a.mean_sigma_linear,
                                 std::max(max_abs_diff(a.rho_nonlinear.matrix(), a.rho_lindblad.matrix()),
                                          max_abs_diff(a.rho_linear.matrix(), a.rho_lindblad.matrix()))});
          t = cfg.t_final;
        }
        s.t.push_back(t);
        for (std::size_t i = 0; i < row.size(); ++i) s.data[i].push_back(row[i]);
        out.push_back(std::move(s));
        break;
      }
      default: throw std::logic_error("output not available for the spin model");
    }
  }
  return out;
}

std::vector<SeriesOutput> run_mechanical(const ScenarioConfig& cfg, const RunOptions& opts) {
  const MechanicalParams& p = cfg.mech;
  const Unraveling gu = cfg.unraveling.gaussian();
  const std::size_t n = cfg.n_steps();
  const std::size_t n_out = n / cfg.output_every;
  const double h = cfg.dt * static_cast<double>(cfg.output_every);
  std::vector<double> grid(n_out + 1);
  for (std::size_t i = 0; i <= n_out; ++i) grid[i] = static_cast<double>(i) * h;
  std::vector<SeriesOutput> out;

  // Gaussian SDE ensemble on the output grid.
  struct Path {
    std::vector<double> x_bar;
    std::vector<Complex> a;
    std::vector<double> dy;
  };
  std::vector<Path> paths;
  const bool need_paths =
      wants(cfg, OutputKind::trajectory) || wants(cfg, OutputKind::ensemble_mean) || wants(cfg, OutputKind::record);
  if (need_paths) {
    paths.resize(cfg.n_trajectories);
    const double sq = std::sqrt(cfg.dt);
    const bool record = wants(cfg, OutputKind::record);
    parallel_for(cfg.n_trajectories, opts.threads, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(cfg.base_seed, k);
      Path& P = paths[k];
      P.x_bar.reserve(n_out + 1);
      GaussianState g{cfg.a0, cfg.x_bar0, cfg.k_bar0};
      P.x_bar.push_back(g.x_bar);
      if (k == 0) P.a.push_back(g.a);
      for (std::size_t s = 0; s < n; ++s) {
        double dW = sq * gaussian_at(seed, s);
        if (record && k == 0) P.dy.push_back(g.x_bar * cfg.dt + dW / (2.0 * std::sqrt(p.lambda)));
        g = gaussian_sde_step(g, p, gu, dW, cfg.dt);
        if ((s + 1) % cfg.output_every == 0) {
          P.x_bar.push_back(g.x_bar);
          if (k == 0) P.a.push_back(g.a);
        }
      }
    });
  }

  for (OutputKind kind : cfg.outputs) {
    switch (kind) {
      case OutputKind::sigma: {
        SeriesOutput s = make_output(cfg, kind, {"sigma_A", "sigma_B", "var"});
        for (double t : grid)
          push_row(s, t,
                   {sigma_x(t, p, cfg.a0, Unraveling::nonlinear), sigma_x(t, p, cfg.a0, Unraveling::linear),
                    var_x(t, p, cfg.a0)});
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::var: {
        std::vector<std::string> cols{"var", "mean_x", "mean_square_nonlinear", "mean_square_linear", "sigma_A",
                                      "sigma_B"};
        if (p.omega > 0.0) cols.push_back("var_literal");
        SeriesOutput s = make_output(cfg, kind, cols);
        for (double t : grid) {
          s.t.push_back(t);
          s.data[0].push_back(var_x(t, p, cfg.a0));
          s.data[1].push_back(ballistic_mean(t, p, cfg.x_bar0, cfg.k_bar0));
          s.data[2].push_back(mean_square_x(t, p, cfg.a0, cfg.x_bar0, cfg.k_bar0, Unraveling::nonlinear));
          s.data[3].push_back(mean_square_x(t, p, cfg.a0, cfg.x_bar0, cfg.k_bar0, Unraveling::linear));
          s.data[4].push_back(sigma_x(t, p, cfg.a0, Unraveling::nonlinear));
          s.data[5].push_back(sigma_x(t, p, cfg.a0, Unraveling::linear));
          if (p.omega > 0.0) s.data[6].push_back(var_x_harmonic_literal(t, p, cfg.a0));
        }
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::riccati: {
        SeriesOutput s = make_output(cfg, kind, {"residual_A", "residual_B", "residual_var"});
        std::vector<CovarianceMatrix> sa, sb, v;
        for (double t : grid) {
          sa.push_back(sigma_matrix(t, p, cfg.a0, Unraveling::nonlinear));
          sb.push_back(sigma_matrix(t, p, cfg.a0, Unraveling::linear));
          v.push_back(var_matrix(t, p, cfg.a0));
        }
        auto ra = riccati_residual(sa, riccati_matrices(p, RiccatiKind::nonlinear), h);
        auto rb = riccati_residual(sb, riccati_matrices(p, RiccatiKind::linear), h);
        auto rv = riccati_residual(v, riccati_matrices(p, RiccatiKind::variance), h);
        for (std::size_t i = 0; i < ra.size(); ++i) push_row(s, grid[i + 1], {ra[i], rb[i], rv[i]});
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::trajectory: {
        std::size_t nc = std::min(paths.size(), kMaxTrajectoryColumns);
        std::vector<std::string> cols{"a_re", "a_im"};
        for (std::size_t k = 0; k < nc; ++k) cols.push_back("x_bar_" + std::to_string(k));
        SeriesOutput s = make_output(cfg, kind, cols);
        s.t = grid;
        for (const Complex& a : paths[0].a) {
          s.data[0].push_back(a.real());
          s.data[1].push_back(a.imag());
        }
        for (std::size_t k = 0; k < nc; ++k) s.data[2 + k] = paths[k].x_bar;
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::ensemble_mean: {
        SeriesOutput s = make_output(cfg, kind, {"mc_mean_square", "mc_standard_error", "mean_square"});
        const double nt = static_cast<double>(paths.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
          double s1 = 0.0, s2 = 0.0;
          for (const auto& P : paths) {
            double v = P.x_bar[i] * P.x_bar[i];
            s1 += v;
            s2 += v * v;
          }
          double mean = s1 / nt;
          double var = nt > 1 ? std::max(0.0, (s2 - nt * mean * mean) / (nt - 1.0)) : 0.0;
          push_row(s, grid[i],
                   {mean, std::sqrt(var / nt), mean_square_x(grid[i], p, cfg.a0, cfg.x_bar0, cfg.k_bar0, gu)});
        }
        out.push_back(std::move(s));
        break;
      }
      case OutputKind::record: {
        SeriesOutput s = make_output(cfg, kind, {"dy"});
        for (std::size_t k = 0; k < paths[0].dy.size(); ++k)
          push_row(s, static_cast<double>(k) * cfg.dt, {paths[0].dy[k]});
        out.push_back(std::move(s));
        break;
      }
      default: throw std::logic_error("output not available for mechanical models");
    }
  }
  return out;
}

}  // namespace

const std::vector<double>& SeriesOutput::column(const std::string& col) const {
  if (col == "t") return t;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == col) return data[i];
  throw std::out_of_range("series " + name + " has no column '" + col + "'");
}

std::vector<SeriesOutput> run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  if (cfg.outputs.empty()) throw std::invalid_argument("run_scenario: no outputs requested");
  return cfg.model == ModelKind::spin ? run_spin(cfg, opts) : run_mechanical(cfg, opts);
}

}  // namespace unravel::cli
