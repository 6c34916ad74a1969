// Command-line front end: `run` simulates one scenario, `sweep` repeats it
// over a list of orthogonality penalties.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "icl_sfm.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 2, kAbort = 3, kIo = 4 };

std::vector<double> parse_gammas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw icl_sfm::ValidationError("gammas", "not a number: '" + item + "'");
    }
    if (used != item.size()) {
      throw icl_sfm::ValidationError("gammas", "not a number: '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) {
    throw icl_sfm::ValidationError("gammas", "list is empty");
  }
  return out;
}

icl_sfm::ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  icl_sfm::ScenarioConfig cfg = path.empty() ? icl_sfm::default_config() : icl_sfm::load_config(path);
  if (seed) {
    cfg.seed = *seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular structure-from-motion observer and planner simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::string gammas_text = "0,5,10,15,25,50";

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Scenario file (JSON); the default scenario when omitted");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "RNG seed, overrides the config");
    sub->add_flag("--quiet", quiet, "Suppress the summary");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "Simulate one closed-loop run");
  common(run_cmd);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep the orthogonality penalty");
  common(sweep_cmd);
  sweep_cmd->add_option("--gammas", gammas_text, "Comma-separated penalty values")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const icl_sfm::ScenarioConfig cfg = load(config_path, seed);

    if (run_cmd->parsed()) {
      const icl_sfm::RunLog log = icl_sfm::run(cfg);
      icl_sfm::emit_artifacts(log, out_dir);
      if (!quiet) {
        std::cout << "steps: " << log.rows.size() << "\n";
        const auto tau = log.tau_all();
        std::cout << "tau: " << (tau ? icl_sfm::format_number(*tau) : std::string("not reached")) << "\n";
        std::cout << "final |p_c^g|: " << icl_sfm::format_number(log.final_position_error()) << " m\n";
        std::cout << "artifacts: " << out_dir << "\n";
      }
      if (!log.ok()) {
        std::cerr << "simulation aborted at t=" << (log.rows.empty() ? 0.0 : log.rows.back().t) << ": "
                  << log.message << "\n";
        return kAbort;
      }
      return kOk;
    }

    const std::vector<double> gammas = parse_gammas(gammas_text);
    const icl_sfm::SweepResult result = icl_sfm::sweep_gamma(cfg, gammas);
    icl_sfm::emit_artifacts(result, out_dir);
    if (!quiet) {
      icl_sfm::write_sweep_csv(std::cout, result);
    }
    if (!result.all_ok()) {
      for (const auto& r : result.rows) {
        if (!r.ok) {
          std::cerr << "gamma=" << r.gamma << " aborted: " << r.error << "\n";
        }
      }
      return kAbort;
    }
    return kOk;
  } catch (const icl_sfm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const icl_sfm::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const icl_sfm::FeatureLost& e) {
    std::cerr << "simulation aborted: " << e.what() << "\n";
    return kAbort;
  } catch (const icl_sfm::DegenerateBearing& e) {
    std::cerr << "simulation aborted: " << e.what() << "\n";
    return kAbort;
  } catch (const icl_sfm::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
}
