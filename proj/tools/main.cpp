#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gread/cli.hpp"
#include "gread/errors.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Config file (key = value lines)");
  cmd->add_option("--out", args.out_dir, "Output directory (default: $GREAD_OUT or .)");
  cmd->add_option("--seed", args.seed, "Override the seed key");
  cmd->add_option("--set", args.overrides, "Override any config key, key=value")
      ->take_all();
}

std::filesystem::path resolve_out(const CommonArgs& args) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("GREAD_OUT"); env && *env) return env;
  return ".";
}

gread::cli::RunConfig load_config(const CommonArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (!args.seed.empty()) overrides.push_back("seed=" + args.seed);
  return gread::cli::RunConfig::load(
      args.config_path.empty() ? std::filesystem::path{} : std::filesystem::path(args.config_path),
      overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gread: graph reaction-diffusion networks"};
  app.require_subcommand(1);

  CommonArgs train_args, generate_args, energy_args, sweep_args, export_args, bench_args;
  std::string generate_kind;
  std::size_t jobs = 1;

  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoint + history");
  add_common(train, train_args);

  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  generate->add_option("kind", generate_kind, "csbm | homophily | grid (overrides dataset.kind)");
  add_common(generate, generate_args);

  CLI::App* energy = app.add_subcommand("energy", "Dirichlet energy trace of a dynamics");
  add_common(energy, energy_args);

  CLI::App* sweep = app.add_subcommand("sweep", "Accuracy sweep over T or tau");
  add_common(sweep, sweep_args);
  sweep->add_option("--jobs", jobs, "Worker threads for sweep cells");

  CLI::App* exporter = app.add_subcommand("export", "Export H(t) snapshots as CSV");
  add_common(exporter, export_args);

  CLI::App* bench = app.add_subcommand("bench", "Per-step rhs timing over graph sizes");
  add_common(bench, bench_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return gread::cli::cmd_train(load_config(train_args), resolve_out(train_args));
    if (generate->parsed()) {
      auto cfg = load_config(generate_args);
      if (!generate_kind.empty()) cfg.set("dataset.kind", generate_kind);
      return gread::cli::cmd_generate(cfg, resolve_out(generate_args));
    }
    if (energy->parsed()) return gread::cli::cmd_energy(load_config(energy_args), resolve_out(energy_args));
    if (sweep->parsed())
      return gread::cli::cmd_sweep(load_config(sweep_args), resolve_out(sweep_args), jobs);
    if (exporter->parsed())
      return gread::cli::cmd_export(load_config(export_args), resolve_out(export_args));
    if (bench->parsed()) return gread::cli::cmd_bench(load_config(bench_args), resolve_out(bench_args));
  } catch (const gread::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
