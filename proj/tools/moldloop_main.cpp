#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "moldloop/runtime.hpp"
#include "moldloop/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitExpectations = 4;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "scenario config file (JSON)")->required();
  cmd->add_option("--seed", flags.seed, "root seed override");
  cmd->add_option("--out", flags.out_dir, "output directory override");
  cmd->add_flag("--quiet", flags.quiet, "suppress the result summary");
}

int execute(const CommonFlags& flags,
            const std::vector<moldloop::runtime::ScenarioKind>& allowed) {
  moldloop::runtime::ScenarioConfig cfg;
  try {
    cfg = moldloop::runtime::load_config(flags.config_path);
    bool ok = false;
    for (auto k : allowed) ok = ok || cfg.kind == k;
    if (!ok)
      throw moldloop::ConfigError(std::string("config scenario '") +
                                  moldloop::runtime::scenario_name(cfg.kind) +
                                  "' does not match this subcommand");
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  } catch (const moldloop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const moldloop::runtime::RunReport report = moldloop::runtime::run_scenario(cfg);
    if (!flags.quiet) std::cout << moldloop::runtime::render_report(report.document);
    return report.expectations_met ? kExitOk : kExitExpectations;
  } catch (const moldloop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using moldloop::runtime::ScenarioKind;

  CLI::App app{"moldloop - cycle-to-cycle quality control toolkit for injection molding"};
  app.set_version_flag("--version", std::string(moldloop::kVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  std::string report_path;

  CLI::App* screen = app.add_subcommand("screen", "factor screening over an experimental design");
  add_common(screen, flags);
  CLI::App* train = app.add_subcommand("train", "train a forward or inverse process model");
  add_common(train, flags);
  CLI::App* tune = app.add_subcommand("tune", "hidden-layer size search with statistical pruning");
  add_common(tune, flags);
  CLI::App* loop = app.add_subcommand("loop", "closed-loop inverse-model adjustment");
  add_common(loop, flags);
  CLI::App* regulate = app.add_subcommand("regulate", "profile regulation against a disturbance");
  add_common(regulate, flags);
  CLI::App* spc = app.add_subcommand("spc-compare", "SPC vs network accept/reject comparison");
  add_common(spc, flags);
  CLI::App* report_cmd = app.add_subcommand("report", "render a saved report.json");
  report_cmd->add_option("path", report_path, "report.json path")->required();

  CLI11_PARSE(app, argc, argv);

  if (report_cmd->parsed()) {
    std::ifstream f(report_path, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot open " << report_path << "\n";
      return kExitRuntime;
    }
    try {
      nlohmann::json doc = nlohmann::json::parse(f);
      std::cout << moldloop::runtime::render_report(doc);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
    return kExitOk;
  }

  if (screen->parsed()) return execute(flags, {ScenarioKind::screen});
  if (train->parsed())
    return execute(flags, {ScenarioKind::train_forward, ScenarioKind::train_inverse});
  if (tune->parsed()) return execute(flags, {ScenarioKind::tune_topology});
  if (loop->parsed()) return execute(flags, {ScenarioKind::closed_loop});
  if (regulate->parsed()) return execute(flags, {ScenarioKind::regulate});
  if (spc->parsed()) return execute(flags, {ScenarioKind::spc_compare});
  return kExitOk;
}
