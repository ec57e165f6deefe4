#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace safelayer::cli {

enum class Mode { filtered, unfiltered, both };

struct RunSpec {
  std::filesystem::path scenario;
  int episodes = 1;
  std::uint64_t seed = 0;
  Mode mode = Mode::both;
  std::filesystem::path out_dir;
  int jobs = 1;
  bool write_logs = true;
};

// Exit codes: 0 all episodes completed, 1 bad arguments or I/O failure,
// 2 config error, 3 some episode aborted (rows are still written).
int cmd_run(const RunSpec& spec, std::ostream& out);

// Lifts every labeled instance of every view, merges per label across views,
// fits one box per label and writes the constraint file.
int cmd_fitbox(const std::vector<std::filesystem::path>& views, const std::filesystem::path& out_path,
               std::optional<double> voxel_size, std::ostream& out);

// Renders the boxes of a constraint file from two fixed cameras.
int cmd_synth_views(const std::filesystem::path& obb_file, const std::filesystem::path& out_dir,
                    std::ostream& out);

int cmd_validate(const std::filesystem::path& scenario, std::ostream& out);

// Built-in hyperparameter defaults of both evaluation settings.
void print_defaults(std::ostream& out);

// --scenario wins; otherwise SAFELAYER_SCENARIO; otherwise empty.
std::filesystem::path resolve_scenario_path(const std::string& flag_value);

std::string metrics_file_name(bool filtered);

}  // namespace safelayer::cli
