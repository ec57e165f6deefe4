#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "safelayer/atacom.hpp"
#include "safelayer/diagnostics.hpp"
#include "safelayer/geometry.hpp"
#include "safelayer/harness.hpp"
#include "safelayer/scenario.hpp"

namespace safelayer::cli {

namespace fs = std::filesystem;

std::filesystem::path resolve_scenario_path(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SAFELAYER_SCENARIO"); env && *env) return env;
  return {};
}

std::string metrics_file_name(bool filtered) {
  return filtered ? "metrics_filtered.csv" : "metrics_unfiltered.csv";
}

void print_defaults(std::ostream& out) {
  const FilterConfig m = FilterConfig::manipulation();
  const FilterConfig a = FilterConfig::air_hockey();
  fmt::print(out, "defaults:\n");
  fmt::print(out, "  manipulation: slack beta {}, slack tolerance {}, error gain {} 1/s, "
                  "filter {} Hz, policy 15 Hz, chunk 32\n",
             m.slack_beta, m.slack_tolerance, m.error_gain, 1.0 / m.substep_dt);
  fmt::print(out, "  air hockey:   slack beta {}, slack tolerance {}, error gain {} 1/s, "
                  "filter {} Hz, policy 12.5 Hz, chunk 16\n",
             a.slack_beta, a.slack_tolerance, a.error_gain, 1.0 / a.substep_dt);
}

namespace {

std::string num(double v) { return fmt::format("{}", v); }

std::string csv_header(const std::vector<BlockInfo>& blocks) {
  std::string h = "episode,seed,mode,max_violation";
  for (const auto& b : blocks) h += ",max_g_" + b.label;
  h += ",violation_steps,contact_steps,substeps,task_success,success,duration_to_success_s,"
       "max_null_residual,max_orth_residual,aborted";
  return h;
}

std::string csv_row(int episode, const EpisodeMetrics& m) {
  std::string r = fmt::format("{},{},{},{}", episode, m.seed, m.filtered ? "filtered" : "unfiltered",
                              num(m.max_violation));
  for (const auto& b : m.per_block) r += "," + num(b.max_g);
  r += fmt::format(",{},{},{},{},{},{},{},{},{}", m.violation_steps, m.contact_steps, m.substeps,
                   m.task_success ? 1 : 0, m.success ? 1 : 0,
                   m.duration_to_success ? num(*m.duration_to_success) : std::string(),
                   num(m.max_null_residual), num(m.max_orth_residual), m.aborted ? 1 : 0);
  return r;
}

// Summary columns: mean max_violation, worst per-block max, total violation
// and contact steps, mean substeps, task success rate, safe-success rate,
// mean time to success, worst residuals, aborted count.
struct Summary {
  long n = 0;
  double sum_max = 0.0;
  std::vector<double> worst_block;
  long violation_steps = 0;
  long contact_steps = 0;
  long substeps = 0;
  long task_success = 0;
  long success = 0;
  double sum_duration = 0.0;
  double worst_null = 0.0;
  double worst_orth = 0.0;
  long aborted = 0;

  void add(const EpisodeMetrics& m) {
    if (worst_block.empty()) {
      worst_block.assign(m.per_block.size(), -std::numeric_limits<double>::infinity());
    }
    ++n;
    sum_max += m.max_violation;
    for (std::size_t b = 0; b < m.per_block.size() && b < worst_block.size(); ++b) {
      worst_block[b] = std::max(worst_block[b], m.per_block[b].max_g);
    }
    violation_steps += m.violation_steps;
    contact_steps += m.contact_steps;
    substeps += m.substeps;
    task_success += m.task_success;
    success += m.success;
    if (m.duration_to_success) sum_duration += *m.duration_to_success;
    worst_null = std::max(worst_null, m.max_null_residual);
    worst_orth = std::max(worst_orth, m.max_orth_residual);
    aborted += m.aborted;
  }

  std::string row(bool filtered) const {
    const double dn = static_cast<double>(std::max(n, 1L));
    std::string r = fmt::format("summary,,{},{}", filtered ? "filtered" : "unfiltered", num(sum_max / dn));
    for (double w : worst_block) r += "," + num(w);
    r += fmt::format(",{},{},{},{},{},{},{},{},{}", violation_steps, contact_steps,
                     num(static_cast<double>(substeps) / dn), num(static_cast<double>(task_success) / dn),
                     num(static_cast<double>(success) / dn),
                     success > 0 ? num(sum_duration / static_cast<double>(success)) : std::string(),
                     num(worst_null), num(worst_orth), aborted);
    return r;
  }
};

// Runs one mode, writing rows in episode order as results arrive.
int run_mode(const Scenario& sc, const RunSpec& spec, bool filtered, std::ostream& out) {
  const fs::path metrics_path = spec.out_dir / metrics_file_name(filtered);
  std::ofstream csv(metrics_path);
  if (!csv) {
    fmt::print(out, "error: cannot write '{}'\n", metrics_path.string());
    return 1;
  }
  const ConstraintSet constraints = sc.build_constraints();
  std::vector<BlockInfo> blocks;
  for (std::size_t b = 0; b < constraints.blocks().size(); ++b) {
    const auto& blk = constraints.blocks()[b];
    blocks.push_back({blk.kind(), blk.label(), constraints.row_offset(b), blk.rows()});
  }
  csv << csv_header(blocks) << '\n';

  const int n = spec.episodes;
  std::vector<std::optional<EpisodeMetrics>> slots(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};

  const auto worker = [&] {
    for (int i = next++; i < n && !stop; i = next++) {
      const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(i);
      EpisodeMetrics m;
      std::string error;
      try {
        const auto policy = make_policy(sc, seed);
        EpisodeResult r = run_episode(sc, filtered, seed, *policy, constraints);
        if (spec.write_logs) {
          const std::string stem = fmt::format("{}_seed{}", filtered ? "filtered" : "unfiltered", seed);
          write_trajectory(r.trajectory, spec.out_dir / "logs" / (stem + ".jsonl"));
          write_action_stream(r.actions, spec.out_dir / "logs" / (stem + "_actions.jsonl"));
        }
        m = std::move(r.metrics);
      } catch (const std::exception& e) {
        error = e.what();
      }
      {
        const std::lock_guard lock(mutex);
        if (error.empty()) {
          slots[static_cast<std::size_t>(i)] = std::move(m);
        } else {
          errors[static_cast<std::size_t>(i)] = error;
          slots[static_cast<std::size_t>(i)] = EpisodeMetrics{};
        }
      }
      ready.notify_all();
    }
  };
  std::vector<std::thread> pool;
  const int jobs = std::clamp(spec.jobs, 1, n);
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);

  Summary summary;
  int status = 0;
  for (int i = 0; i < n; ++i) {
    std::unique_lock lock(mutex);
    ready.wait(lock, [&] { return slots[static_cast<std::size_t>(i)].has_value(); });
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      fmt::print(out, "error: episode {} failed: {}\n", i, errors[static_cast<std::size_t>(i)]);
      stop = true;
      status = 1;
      break;
    }
    const EpisodeMetrics m = *slots[static_cast<std::size_t>(i)];
    lock.unlock();
    csv << csv_row(i, m) << '\n';
    csv.flush();
    summary.add(m);
    if (m.aborted) status = 3;
  }
  for (auto& t : pool) t.join();
  if (status == 1) return status;
  csv << summary.row(filtered) << '\n';
  csv.flush();
  if (!csv) {
    fmt::print(out, "error: write to '{}' failed\n", metrics_path.string());
    return 1;
  }
  fmt::print(out, "{:>10}: success {:.3f}, safe success {:.3f}, mean max violation {:.3e}, "
                  "episodes with violations {}/{}\n",
             filtered ? "filtered" : "unfiltered", static_cast<double>(summary.task_success) / n,
             static_cast<double>(summary.success) / n, summary.sum_max / n,
             std::count_if(slots.begin(), slots.end(),
                           [](const auto& s) { return s && s->violation_steps > 0; }),
             n);
  fmt::print(out, "            wrote {}\n", metrics_path.string());
  return status;
}

}  // namespace

int cmd_run(const RunSpec& spec, std::ostream& out) {
  if (spec.episodes < 1) {
    fmt::print(out, "error: --episodes must be >= 1\n");
    return 1;
  }
  if (spec.scenario.empty()) {
    fmt::print(out, "error: no scenario given (use --scenario or SAFELAYER_SCENARIO)\n");
    return 1;
  }
  Scenario sc;
  try {
    sc = load_scenario(spec.scenario);
    sc.validate();
  } catch (const ParseError& e) {
    fmt::print(out, "config error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(out, "config error: {}: {}\n", spec.scenario.string(), e.what());
    return 2;
  }
  print_defaults(out);
  fmt::print(out, "scenario {}: policy {}, {} Hz policy / {} Hz filter ({} substeps), chunk {}, "
                  "beta {}, tolerance {}, error gain {} 1/s\n",
             sc.name, policy_kind(sc.policy), sc.policy_rate_hz, sc.filter_rate_hz, sc.substeps(),
             sc.chunk_size, sc.filter.slack_beta, sc.filter.slack_tolerance, sc.filter.error_gain);

  std::error_code ec;
  fs::create_directories(spec.out_dir, ec);
  if (spec.write_logs) fs::create_directories(spec.out_dir / "logs", ec);
  if (ec) {
    fmt::print(out, "error: cannot create '{}': {}\n", spec.out_dir.string(), ec.message());
    return 1;
  }
  try {
    save_scenario(sc, spec.out_dir / "effective_config.yaml");
  } catch (const std::exception& e) {
    fmt::print(out, "error: {}\n", e.what());
    return 1;
  }

  int status = 0;
  for (bool filtered : {true, false}) {
    if ((filtered && spec.mode == Mode::unfiltered) || (!filtered && spec.mode == Mode::filtered)) {
      continue;
    }
    const int s = run_mode(sc, spec, filtered, out);
    if (s == 1) return 1;
    status = std::max(status, s);
  }
  return status;
}

int cmd_fitbox(const std::vector<fs::path>& views, const fs::path& out_path,
               std::optional<double> voxel_size, std::ostream& out) {
  if (views.empty()) {
    fmt::print(out, "error: no views given\n");
    return 1;
  }
  std::map<int, std::vector<std::vector<Vector3>>> per_label;
  try {
    for (const auto& path : views) {
      const LabeledView view = read_view(path);
      for (int label : view.instance_labels()) {
        per_label[label].push_back(lift_mask(view.camera, view.mask_for(label)));
      }
    }
  } catch (const std::exception& e) {
    fmt::print(out, "error: {}\n", e.what());
    return 1;
  }
  std::vector<OrientedBBox> boxes;
  for (const auto& [label, sets] : per_label) {
    const auto points = merge_views(sets, voxel_size);
    if (points.size() < 4) {
      fmt::print(out, "instance {}: {} points, too few to fit a box; skipped\n", label, points.size());
      continue;
    }
    const OrientedBBox box = fit_obb(points);
    fmt::print(out, "box {} (instance {}, {} points): extents {:.6f} {:.6f} {:.6f} m, volume {:.6g} m^3\n",
               boxes.size(), label, points.size(), box.extents.x(), box.extents.y(), box.extents.z(),
               box.volume());
    boxes.push_back(box);
  }
  if (boxes.empty()) fmt::print(out, "no valid pixels in any mask: writing an empty constraint file\n");
  try {
    export_constraints(boxes, out_path);
  } catch (const std::exception& e) {
    fmt::print(out, "error: {}\n", e.what());
    return 1;
  }
  fmt::print(out, "wrote {} box(es) to {}\n", boxes.size(), out_path.string());
  return 0;
}

int cmd_synth_views(const fs::path& obb_file, const fs::path& out_dir, std::ostream& out) {
  try {
    const auto boxes = import_constraints(obb_file);
    Vector3 target = Vector3::Zero();
    for (const auto& b : boxes) target += b.center;
    if (!boxes.empty()) target /= static_cast<double>(boxes.size());
    CameraModel cam{600.0, 600.0, 319.5, 239.5, Transform::Identity()};
    fs::create_directories(out_dir);
    const Vector3 eyes[] = {target + Vector3(1.6, -1.2, 1.1), target + Vector3(-1.3, 1.5, -0.9)};
    for (int i = 0; i < 2; ++i) {
      cam.pose = look_at(eyes[i], target);
      const fs::path path = out_dir / fmt::format("view{}.json", i);
      write_view(render_boxes(cam, 640, 480, boxes), path);
      fmt::print(out, "wrote {}\n", path.string());
    }
  } catch (const std::exception& e) {
    fmt::print(out, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

int cmd_validate(const fs::path& scenario, std::ostream& out) {
  if (scenario.empty()) {
    fmt::print(out, "error: no scenario given (use --scenario or SAFELAYER_SCENARIO)\n");
    return 1;
  }
  bool ok = true;
  for (const auto& c : validate_scenario_file(scenario)) {
    fmt::print(out, "{} {}: {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace safelayer::cli
