#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace unravel {

enum class MeasureTag { raw, physical };

struct NoisePath {
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::vector<double> increments;
  MeasureTag tag = MeasureTag::physical;

  std::size_t size() const { return increments.size(); }
  // W at each grid point, starting with W_0 = 0 (size() + 1 entries).
  std::vector<double> cumulative() const;
};

struct RecordSeries {
  std::vector<double> values;  // dy_k
  double dt = 0.0;
};

// Standard normal sample number `index` for `seed`. Pure function of both.
double gaussian_at(std::uint64_t seed, std::uint64_t index);

// Seed of trajectory k in an ensemble with the given base seed.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t k);

NoisePath wiener_path(std::uint64_t seed, double dt, std::size_t n_steps);

// dy_k = xi_R <L>_k dt + dW_k / (2 sqrt(lambda))
RecordSeries measurement_record(const NoisePath& path, std::span<const double> conditional_L,
                                double xi_R, double lambda);

// Inverse of measurement_record. Exact up to two roundings per sample.
NoisePath reconstruct_noise(const RecordSeries& record, std::span<const double> conditional_L,
                            double xi_R, double lambda);

enum class ShiftDirection { raw_to_physical, physical_to_raw };

// physical dW = raw dxi - drift dt. `drift` is the full per-step drift,
// e.g. 2 sqrt(lambda) <sigma_z> for the spin model.
NoisePath girsanov_shift(const NoisePath& path, std::span<const double> drift, ShiftDirection direction);

// Sums consecutive blocks of `factor` increments: the same Brownian path on
// a grid with step factor * dt.
NoisePath coarsen(const NoisePath& path, std::size_t factor);

}  // namespace unravel
