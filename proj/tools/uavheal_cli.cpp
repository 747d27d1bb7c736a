#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "uavheal/errors.hpp"
#include "uavheal/experiments.hpp"
#include "uavheal/meta.hpp"
#include "uavheal/topology_io.hpp"

#ifndef UAVHEAL_VERSION
#define UAVHEAL_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uavheal;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> trials;
  std::string store_path;
  bool full_scale = false;
  bool force = false;
  std::optional<int> threads;
  bool trajectory = false;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_config(const Common& c) {
  if (c.config_path.empty()) return json::object();
  try {
    return json::parse(read_text(c.config_path));
  } catch (const json::parse_error& e) {
    throw ConfigError(c.config_path + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig resolve(const Common& c, const json& file) {
  ExperimentConfig cfg;
  if (c.full_scale) apply_full_scale(cfg);
  try {
    merge_config(cfg, file);
    if (c.seed) cfg.seed = *c.seed;
    if (c.trials) cfg.trials = *c.trials;
    if (c.threads) cfg.threads = *c.threads;
    if (c.trajectory) cfg.record_trajectory = true;
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::optional<MetaParamStore> open_store(const Common& c) {
  if (c.store_path.empty()) {
    std::cerr << "no --store given: GCN planning starts from random weights\n";
    return std::nullopt;
  }
  try {
    return load_store(c.store_path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

// Refuses to clobber earlier results unless forced.
void prepare_out(const fs::path& dir, const Artifacts& files, bool force) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
  if (force) return;
  if (fs::exists(dir / "manifest.json")) throw ConfigError(dir.string() + " already holds results; use --force");
  for (const auto& [name, body] : files)
    if (fs::exists(dir / name)) throw ConfigError((dir / name).string() + " exists; use --force");
}

void emit(const std::string& command, const Common& c, const ExperimentConfig& cfg, const Artifacts& files,
          const json& extra, const std::string& started) {
  const fs::path dir = c.out;
  prepare_out(dir, files, c.force);
  json listed = json::array();
  for (const auto& [name, body] : files) {
    write_text(dir / name, body);
    listed.push_back(name);
  }
  json manifest{{"command", command},
                {"version", UAVHEAL_VERSION},
                {"config", config_to_json(cfg)},
                {"config_file", c.config_path},
                {"store", c.store_path},
                {"full_scale", c.full_scale},
                {"started_utc", started},
                {"finished_utc", utc_now()},
                {"files", listed}};
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  std::cerr << "wrote " << listed.size() << " files to " << dir.string() << "\n";
}

int run(const std::string& command, const Common& c) {
  const std::string started = utc_now();
  const json file = read_config(c);
  const ExperimentConfig cfg = resolve(c, file);
  json extra = json::object();

  if (command == "meta-train") {
    const auto result = run_meta_train(cfg, [&](int n) { std::cerr << "meta-trained n=" << n << "\n"; });
    Artifacts files = render(result);
    if (!c.store_path.empty()) {
      const fs::path p = c.store_path;
      if (fs::exists(p) && !c.force) throw ConfigError(p.string() + " exists; use --force");
      save_store(result.store, p);
      extra["store_written"] = p.string();
    }
    emit(command, c, cfg, files, extra, started);
    return 0;
  }
  if (command == "sweep-c") {
    const auto r = sweep_c(cfg);
    emit(command, c, cfg, render(r), extra, started);
    if (!r.c1_all_connected) std::cerr << "warning: some VRG at c = 1 was not connected\n";
    return 0;
  }
  if (command == "sweep-eta") {
    emit(command, c, cfg, render(sweep_eta(cfg)), extra, started);
    return 0;
  }
  if (command == "sweep-eps") {
    emit(command, c, cfg, render(sweep_eps(cfg)), extra, started);
    return 0;
  }
  if (command == "heal-oneoff") {
    const auto store = open_store(c);
    const auto r = heal_oneoff(cfg, store ? &*store : nullptr);
    emit(command, c, cfg, render(r, cfg.record_trajectory), extra, started);
    return 0;
  }
  if (command == "sim-general") {
    std::optional<Scenario> fixed;
    try {
      if (file.contains("scenario")) {
        fixed = scenario_from_json(file.at("scenario"), fs::path(c.config_path).parent_path());
      } else if (file.contains("scenario_file")) {
        const fs::path p = fs::path(c.config_path).parent_path() / file.at("scenario_file").get<std::string>();
        fixed = scenario_from_json(json::parse(read_text(p)), p.parent_path());
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("scenario: ") + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    const auto store = open_store(c);
    const auto r = sim_general(cfg, store ? &*store : nullptr, fixed);
    if (r.ratio) std::cerr << "J_c(cr-mgcm) / J_c(cr-mgcm-glob) = " << *r.ratio << "\n";
    emit(command, c, cfg, render(r, cfg.record_trajectory), extra, started);
    return 0;
  }
  if (command == "bench") {
    const auto store = open_store(c);
    emit(command, c, cfg, render(bench(cfg, store ? &*store : nullptr)), extra, started);
    return 0;
  }
  throw ConfigError("unknown command " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV swarm self-healing experiments"};
  app.require_subcommand(1);
  Common c;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"meta-train", "train meta parameters for every swarm size 2..N"},
      {"sweep-c", "VRG cluster count against the relaxation factor c"},
      {"sweep-eta", "GCO iterations and displacement against eta"},
      {"sweep-eps", "GCO iterations and displacement against epsilon"},
      {"heal-oneoff", "one-off destruction: CR-MGC against CEN"},
      {"sim-general", "general destruction schedule: CR-MGCM, CR-MGCM_glob, CEN"},
      {"bench", "time one online planning decision against CEN"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "base seed");
    sub->add_option("--out", c.out, "output directory")->required();
    sub->add_option("--trials", c.trials, "trials per grid point")->check(CLI::PositiveNumber);
    sub->add_option("--store", c.store_path, "meta parameter store (written by meta-train, read otherwise)");
    sub->add_flag("--paper-scale", c.full_scale, "N=200, U0=400, 100 trials (long running)");
    sub->add_flag("--force", c.force, "overwrite existing results");
    sub->add_option("--threads", c.threads, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
    sub->add_flag("--trajectory", c.trajectory, "write every per-uav trajectory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRun;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRun;
  }
}
