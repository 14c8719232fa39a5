#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "unravel/gaussian_dynamics.hpp"
#include "unravel/sde_engine.hpp"
#include "unravel/spin_model.hpp"

namespace unravel::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class ModelKind { spin, free_particle, harmonic };
enum class OutputKind { trajectory, ensemble_mean, sigma, var, record, riccati, collapse_stats, bell };

std::string to_string(ModelKind m);
std::string to_string(OutputKind o);

struct UnravelingChoice {
  enum class Kind { nonlinear, linear, xi } kind = Kind::nonlinear;
  double xi_R = 1.0;
  double xi_I = 0.0;

  UnravelingParams params(double lambda) const;
  Unraveling gaussian() const;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ModelKind model = ModelKind::spin;
  UnravelingChoice unraveling;
  SpinParams spin;
  std::vector<Complex> psi0{0.5, std::sqrt(3.0) / 2.0};
  MechanicalParams mech;
  Complex a0{1.0, 0.0};
  double x_bar0 = 0.0;
  double k_bar0 = 0.0;
  double dt = 1e-3;
  double t_final = 1.0;
  std::size_t n_trajectories = 0;
  std::uint64_t base_seed = 1;
  std::size_t output_every = 1;
  std::vector<OutputKind> outputs;

  std::size_t n_steps() const;
  StateVector initial_state() const;
  nlohmann::json to_json() const;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Parse and validate; throws ConfigError listing every violation found.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);

std::vector<std::string> preset_names();
// Throws ConfigError for an unknown name.
ScenarioConfig preset(const std::string& name);
// Physics mapping of a preset, as plain text.
std::string describe(const ScenarioConfig& cfg);
// Non-fatal remarks about a config (e.g. ill-conditioned parameters).
std::vector<std::string> warnings(const ScenarioConfig& cfg);

struct SeriesOutput {
  std::string name;  // file stem: <scenario>_<kind>
  OutputKind kind = OutputKind::sigma;
  nlohmann::json metadata;
  std::vector<std::string> columns;  // excluding t
  std::vector<double> t;
  std::vector<std::vector<double>> data;  // data[column][row]

  const std::vector<double>& column(const std::string& name) const;
};

struct RunOptions {
  unsigned threads = 1;
};

std::vector<SeriesOutput> run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

void write_csv(const SeriesOutput& s, std::ostream& os);
std::string to_csv(const SeriesOutput& s);
SeriesOutput read_csv(std::istream& is);
SeriesOutput read_csv_file(const std::filesystem::path& path);
// Writes <dir>/<name>.csv for each output; returns the paths.
std::vector<std::filesystem::path> write_outputs(const std::vector<SeriesOutput>& outputs,
                                                 const std::filesystem::path& dir);

struct Check {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  bool passed() const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Evaluates every check that applies to the given outputs. An empty set
// is an explicit failure.
Report report(const std::vector<SeriesOutput>& outputs);

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string summary;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  unsigned threads = 1;
  std::vector<int> only;  // empty: all
  std::ostream* progress = nullptr;  // one line per criterion as it finishes
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});
std::string format_criterion(const CriterionResult& r);

}  // namespace unravel::cli
