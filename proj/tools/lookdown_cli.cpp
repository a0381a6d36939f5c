#include <lookdown/experiments.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kPass = 0, kCheckFailed = 1, kConfigError = 2;

int run(const std::string& path, const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out_dir,
        const std::optional<long>& replicas, const std::optional<long>& workers) {
  using lookdown::json;
  json cfg;
  try {
    std::ifstream in(path);
    if (!in) throw lookdown::ConfigError("cannot open " + path);
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    std::cerr << "config error: " << path << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const lookdown::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (cfg.is_object()) {
    if (seed) cfg["seed"] = *seed;
    if (replicas) cfg["replicas"] = *replicas;
    if (workers) cfg["workers"] = *workers;
  }
  std::string dir = out_dir.value_or("");
  if (dir.empty() && cfg.is_object() && cfg.contains("out") && cfg["out"].is_string()) dir = cfg["out"];
  if (dir.empty() && cfg.is_object() && cfg.contains("experiment") && cfg["experiment"].is_string())
    dir = "results/" + cfg["experiment"].get<std::string>();

  lookdown::ExperimentOutput out;
  try {
    out = lookdown::run_experiment(cfg);
  } catch (const lookdown::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kCheckFailed;
  }
  lookdown::write_outputs(out, dir);
  for (const auto& v : out.report.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.check << "  [" << v.statement << "] statistic=" << v.statistic
              << " tolerance=" << v.tolerance << '\n';
  const bool ok = out.report.all_pass();
  std::cout << out.experiment << ": " << (ok ? "all checks passed" : "some checks failed") << " (report in " << dir
            << "/report.json)\n";
  return ok ? kPass : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lookdown construction experiments"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment configuration");
  std::string path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<long> replicas, workers;
  run_cmd->add_option("config", path, "JSON configuration file")->required();
  run_cmd->add_option("--seed", seed, "master seed (overrides the config)");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--replicas", replicas, "replica count (overrides the config)");
  run_cmd->add_option("--workers", workers, "worker threads (does not change results)");

  auto* list_cmd = app.add_subcommand("list", "list experiments and the statements they check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (*list_cmd) {
    for (const auto& e : lookdown::experiments()) {
      std::cout << e.name << "\n  " << e.summary << '\n';
      for (const auto& s : e.statements) std::cout << "    - " << s << '\n';
    }
    return 0;
  }
  return run(path, seed, out_dir, replicas, workers);
}
