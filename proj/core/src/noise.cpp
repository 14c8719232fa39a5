#include "unravel/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace unravel {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in (0, 1], never 0 so log() is finite.
double uniform_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

void check_record_args(double xi_R, double lambda) {
  if (!(xi_R >= 0.0)) throw std::invalid_argument("measurement record: xi_R must be >= 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("measurement record: lambda must be > 0");
}

}  // namespace

std::vector<double> NoisePath::cumulative() const {
  std::vector<double> w(increments.size() + 1, 0.0);
  for (std::size_t k = 0; k < increments.size(); ++k) w[k + 1] = w[k] + increments[k];
  return w;
}

double gaussian_at(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t key = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  double u1 = uniform_open(splitmix64(key + 2 * index));
  double u2 = uniform_open(splitmix64(key + 2 * index + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t k) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(k + 0x243f6a8885a308d3ULL));
}

NoisePath wiener_path(std::uint64_t seed, double dt, std::size_t n_steps) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("wiener_path: dt must be positive");
  if (n_steps < 1) throw std::invalid_argument("wiener_path: n_steps must be >= 1");
  NoisePath p;
  p.seed = seed;
  p.dt = dt;
  p.increments.resize(n_steps);
  const double s = std::sqrt(dt);
  for (std::size_t k = 0; k < n_steps; ++k) p.increments[k] = s * gaussian_at(seed, k);
  return p;
}

RecordSeries measurement_record(const NoisePath& path, std::span<const double> conditional_L,
                                double xi_R, double lambda) {
  check_record_args(xi_R, lambda);
  check_lengths(path.size(), conditional_L.size(), "measurement_record");
  RecordSeries r;
  r.dt = path.dt;
  r.values.resize(path.size());
  const double scale = 1.0 / (2.0 * std::sqrt(lambda));
  for (std::size_t k = 0; k < path.size(); ++k)
    r.values[k] = xi_R * conditional_L[k] * path.dt + path.increments[k] * scale;
  return r;
}

NoisePath reconstruct_noise(const RecordSeries& record, std::span<const double> conditional_L,
                            double xi_R, double lambda) {
  check_record_args(xi_R, lambda);
  check_lengths(record.values.size(), conditional_L.size(), "reconstruct_noise");
  NoisePath p;
  p.dt = record.dt;
  p.increments.resize(record.values.size());
  const double scale = 2.0 * std::sqrt(lambda);
  for (std::size_t k = 0; k < record.values.size(); ++k)
    p.increments[k] = (record.values[k] - xi_R * conditional_L[k] * record.dt) * scale;
  return p;
}

NoisePath girsanov_shift(const NoisePath& path, std::span<const double> drift, ShiftDirection direction) {
  check_lengths(path.size(), drift.size(), "girsanov_shift");
  MeasureTag expected = direction == ShiftDirection::raw_to_physical ? MeasureTag::raw : MeasureTag::physical;
  if (path.tag != expected) throw std::invalid_argument("girsanov_shift: path tag does not match direction");
  NoisePath out = path;
  const double sign = direction == ShiftDirection::raw_to_physical ? -1.0 : 1.0;
  for (std::size_t k = 0; k < path.size(); ++k) out.increments[k] += sign * drift[k] * path.dt;
  out.tag = direction == ShiftDirection::raw_to_physical ? MeasureTag::physical : MeasureTag::raw;
  return out;
}

NoisePath coarsen(const NoisePath& path, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("coarsen: factor must be >= 1");
  if (path.size() % factor != 0) throw std::invalid_argument("coarsen: length not divisible by factor");
  NoisePath out;
  out.seed = path.seed;
  out.dt = path.dt * static_cast<double>(factor);
  out.tag = path.tag;
  out.increments.resize(path.size() / factor);
  for (std::size_t k = 0; k < out.increments.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < factor; ++j) s += path.increments[k * factor + j];
    out.increments[k] = s;
  }
  return out;
}

}  // namespace unravel
