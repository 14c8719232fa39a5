#include <benchmark/benchmark.h>

#include <cmath>

#include "unravel/gaussian_dynamics.hpp"
#include "unravel/gcm_kraus.hpp"
#include "unravel/sde_engine.hpp"
#include "unravel/spin_model.hpp"

using namespace unravel;

namespace {

StateVector tilted() { return StateVector{0.5, std::sqrt(3.0) / 2.0}; }

void BM_SseStep(benchmark::State& st) {
  ModelSpec m = spin_model({});
  SseStepper step(m, UnravelingParams::nonlinear(1.0), 1e-3, static_cast<Scheme>(st.range(0)));
  StateVector psi = tilted();
  std::uint64_t k = 0;
  for (auto _ : st) {
    psi = step.advance(psi, 0.03 * gaussian_at(1, k++));
    benchmark::DoNotOptimize(psi);
  }
}
BENCHMARK(BM_SseStep)->Arg(static_cast<int>(Scheme::milstein))->Arg(static_cast<int>(Scheme::euler_maruyama));

void BM_SpinEnsemble(benchmark::State& st) {
  ModelSpec m = spin_model({});
  TrajectoryOptions o;
  o.stride = 1000;
  o.keep_noise = false;
  o.keep_record = false;
  for (auto _ : st) {
    auto ens = simulate_ensemble(m, UnravelingParams::nonlinear(1.0), tilted(), 1e-3, 1000, 7,
                                 static_cast<std::size_t>(st.range(0)), o);
    benchmark::DoNotOptimize(ens);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0) * 1000);
}
BENCHMARK(BM_SpinEnsemble)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_GirsanovTrajectory(benchmark::State& st) {
  SpinParams sp;
  auto path = wiener_path(3, 1e-3, 1000);
  for (auto _ : st) benchmark::DoNotOptimize(spin_girsanov_trajectory(tilted(), sp, path, 1000));
}
BENCHMARK(BM_GirsanovTrajectory)->Unit(benchmark::kMicrosecond);

void BM_KrausApply(benchmark::State& st) {
  auto L = pauli(Axis::z);
  GcmParams gp = solve_gcm_params(std::polar(1.0, 0.6), 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(kraus_apply(tilted(), L, gp, 2e-4, 1e-3));
}
BENCHMARK(BM_KrausApply);

void BM_PovmCompleteness(benchmark::State& st) {
  auto L = pauli(Axis::z);
  GcmParams gp = solve_gcm_params(1.0, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(povm_completeness(L, gp, 1e-3));
}
BENCHMARK(BM_PovmCompleteness)->Unit(benchmark::kMicrosecond);

void BM_WidthClosedForm(benchmark::State& st) {
  auto p = presets::harmonic();
  auto sc = spread_constants(p, presets::harmonic_a0(), Unraveling::nonlinear);
  double t = 0.0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(a_closed_form(t, sc));
    t += 1e-7;
  }
}
BENCHMARK(BM_WidthClosedForm);

void BM_MeanSquareQuadrature(benchmark::State& st) {
  auto p = presets::fig1();
  for (auto _ : st)
    benchmark::DoNotOptimize(mean_square_x(0.5, p, presets::kFig1A0, 0.0, 0.0, Unraveling::nonlinear));
}
BENCHMARK(BM_MeanSquareQuadrature)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
