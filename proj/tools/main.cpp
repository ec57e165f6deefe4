#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("safelayer"));
  namespace cli = safelayer::cli;

  CLI::App app{"Constraint-manifold safety layer: scenario runner and geometry tools"};
  app.require_subcommand(1);

  cli::RunSpec spec;
  std::string scenario;
  std::string mode = "both";
  auto* run = app.add_subcommand("run", "Run filtered and/or unfiltered episodes");
  run->add_option("--scenario", scenario, "Scenario YAML (default: $SAFELAYER_SCENARIO)");
  run->add_option("--episodes", spec.episodes, "Number of episodes")->check(CLI::PositiveNumber);
  run->add_option("--seed", spec.seed, "Seed of the first episode");
  run->add_option("--mode", mode, "filtered, unfiltered or both")
      ->check(CLI::IsMember({"filtered", "unfiltered", "both"}));
  run->add_option("--out", spec.out_dir, "Output directory")->required();
  run->add_option("--jobs", spec.jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("!--no-logs", spec.write_logs, "Skip per-episode trajectory logs");

  std::vector<std::filesystem::path> views;
  std::filesystem::path fit_out;
  double voxel = 0.0;
  auto* fitbox = app.add_subcommand("fitbox", "Fit boxes to labeled depth views");
  fitbox->add_option("--cams", views, "View files (safelayer-view JSON)")->required();
  fitbox->add_option("--out", fit_out, "Constraint file to write")->required();
  fitbox->add_option("--voxel", voxel, "Voxel size for merging, m (0 = off)")->check(CLI::NonNegativeNumber);

  std::filesystem::path synth_obb, synth_out;
  auto* synth = app.add_subcommand("synth-views", "Render two labeled depth views of a box file");
  synth->add_option("--obb", synth_obb, "Constraint file")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* validate = app.add_subcommand("validate", "Check a scenario config");
  validate->add_option("--scenario", scenario, "Scenario YAML (default: $SAFELAYER_SCENARIO)");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    spec.scenario = cli::resolve_scenario_path(scenario);
    spec.mode = mode == "filtered" ? cli::Mode::filtered
                : mode == "unfiltered" ? cli::Mode::unfiltered
                                       : cli::Mode::both;
    return cli::cmd_run(spec, std::cout);
  }
  if (*fitbox) {
    return cli::cmd_fitbox(views, fit_out, voxel > 0.0 ? std::optional<double>(voxel) : std::nullopt,
                           std::cout);
  }
  if (*synth) return cli::cmd_synth_views(synth_obb, synth_out, std::cout);
  return cli::cmd_validate(cli::resolve_scenario_path(scenario), std::cout);
}
