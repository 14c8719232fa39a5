#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "scenario/scenario.hpp"

namespace cli = unravel::cli;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;

cli::ScenarioConfig resolve(const std::string& config, const std::string& preset_name) {
  if (!config.empty() && !preset_name.empty()) throw cli::ConfigError({"give either --config or --preset, not both"});
  if (config.empty() && preset_name.empty()) throw cli::ConfigError({"one of --config or --preset is required"});
  return config.empty() ? cli::preset(preset_name) : cli::load_config(config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic unravelings of single-operator Lindblad dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);

  std::string config, preset_name, out_dir = ".", report_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 1;
  bool check = false;

  auto* run = app.add_subcommand("run", "run a scenario and write CSV series");
  run->add_option("--config", config, "JSON scenario file");
  run->add_option("--preset", preset_name, "built-in scenario name");
  run->add_option("--seed", seed, "override the base seed")->each([&](const std::string&) { seed_given = true; });
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));
  run->add_flag("--check", check, "evaluate checks on the outputs; exit 1 on failure");
  run->add_option("--report", report_path, "write the check report as JSON");

  auto* presets = app.add_subcommand("presets", "list built-in scenarios");

  std::string describe_preset, describe_config;
  auto* describe = app.add_subcommand("describe", "print the physics of a scenario");
  describe->add_option("--preset", describe_preset, "built-in scenario name");
  describe->add_option("--config", describe_config, "JSON scenario file");
  bool dump_json = false;
  describe->add_flag("--json", dump_json, "print the resolved config as JSON");

  std::vector<std::string> report_inputs;
  std::string report_json;
  auto* rep_cmd = app.add_subcommand("report", "re-check CSV series written by run");
  rep_cmd->add_option("inputs", report_inputs, "CSV files or directories")->required();
  rep_cmd->add_option("--json", report_json, "write the report as JSON");

  std::vector<int> only;
  unsigned check_threads = 1;
  std::string check_report;
  auto* acc = app.add_subcommand("check", "run the acceptance criteria");
  acc->add_option("--only", only, "criterion numbers to run")->delimiter(',')->check(CLI::Range(1, 11));
  acc->add_option("--threads", check_threads, "worker threads")->check(CLI::Range(1u, 256u));
  acc->add_option("--report", check_report, "write results as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*presets) {
      for (const auto& n : cli::preset_names()) std::cout << n << "\n";
      return kOk;
    }
    if (*describe) {
      cli::ScenarioConfig cfg = resolve(describe_config, describe_preset);
      if (dump_json)
        std::cout << cfg.to_json().dump(2) << "\n";
      else
        std::cout << cli::describe(cfg);
      return kOk;
    }
    if (*rep_cmd) {
      std::vector<cli::SeriesOutput> series;
      for (const auto& in : report_inputs) {
        std::filesystem::path p(in);
        if (std::filesystem::is_directory(p)) {
          std::vector<std::filesystem::path> files;
          for (const auto& e : std::filesystem::directory_iterator(p))
            if (e.path().extension() == ".csv") files.push_back(e.path());
          std::sort(files.begin(), files.end());
          for (const auto& f : files) series.push_back(cli::read_csv_file(f));
        } else {
          series.push_back(cli::read_csv_file(p));
        }
      }
      cli::Report rep = cli::report(series);
      std::cout << rep.to_text();
      if (!report_json.empty()) std::ofstream(report_json) << rep.to_json().dump(2) << "\n";
      return rep.passed() ? kOk : kCheckFailed;
    }
    if (*acc) {
      cli::AcceptanceOptions o;
      o.only = only;
      o.threads = check_threads;
      o.progress = &std::cout;
      auto results = cli::run_acceptance(o);
      bool ok = !results.empty();
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : results) {
        ok = ok && r.passed;
        j.push_back({{"criterion", r.id}, {"title", r.title}, {"passed", r.passed}, {"summary", r.summary},
                     {"seconds", r.seconds}});
      }
      if (!check_report.empty()) std::ofstream(check_report) << j.dump(2) << "\n";
      std::cout << (ok ? "acceptance: all criteria passed" : "acceptance: FAILED") << "\n";
      return ok ? kOk : kCheckFailed;
    }

    cli::ScenarioConfig cfg = resolve(config, preset_name);
    if (seed_given) {
      cfg.base_seed = seed;
      cfg = cli::parse_config(cfg.to_json());
    }
    for (const auto& w : cli::warnings(cfg)) std::cerr << "warning: " << w << "\n";
    auto outputs = cli::run_scenario(cfg, {threads});
    for (const auto& p : cli::write_outputs(outputs, out_dir)) std::cout << p.string() << "\n";
    if (check || !report_path.empty()) {
      cli::Report rep = cli::report(outputs);
      if (check) std::cout << rep.to_text();
      if (!report_path.empty()) std::ofstream(report_path) << rep.to_json().dump(2) << "\n";
      if (check && !rep.passed()) return kCheckFailed;
    }
    return kOk;
  } catch (const cli::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}
