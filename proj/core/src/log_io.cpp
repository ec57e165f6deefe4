#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "safelayer/harness.hpp"

namespace safelayer {

using nlohmann::json;

namespace {

json vec_json(const Eigen::Ref<const Vector>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  json blocks = json::array();
  for (const auto& b : traj.blocks) {
    blocks.push_back({{"kind", b.kind}, {"label", b.label}, {"offset", b.offset}, {"rows", b.rows}});
  }
  const json header = {{"format", "safelayer-trajectory"},
                       {"version", 1},
                       {"scenario", traj.scenario},
                       {"seed", traj.seed},
                       {"filtered", traj.filtered},
                       {"substep_dt_s", traj.substep_dt},
                       {"blocks", blocks}};
  out << header.dump() << '\n';
  for (const auto& r : traj.records) {
    const json j = {{"t", r.t},
                    {"q", vec_json(r.q)},
                    {"g", vec_json(r.g)},
                    {"ee", vec_json(r.ee)},
                    {"norm_rfm", r.a_rfm_norm},
                    {"norm_drift", r.a_drift_norm},
                    {"norm_err", r.a_err_norm},
                    {"norm_tangent", r.a_tangent_norm},
                    {"norm_safe", r.a_safe_norm},
                    {"null_residual", r.null_residual},
                    {"orth_residual", r.orth_residual}};
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  Trajectory traj;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.at("format") != "safelayer-trajectory" || j.at("version") != 1) {
          throw ParseError(path.string(), line_no, "not a safelayer-trajectory v1 log");
        }
        traj.scenario = j.at("scenario").get<std::string>();
        traj.seed = j.at("seed").get<std::uint64_t>();
        traj.filtered = j.at("filtered").get<bool>();
        traj.substep_dt = j.at("substep_dt_s").get<double>();
        for (const auto& b : j.at("blocks")) {
          traj.blocks.push_back({b.at("kind").get<std::string>(), b.at("label").get<std::string>(),
                                 b.at("offset").get<int>(), b.at("rows").get<int>()});
        }
        have_header = true;
        continue;
      }
      TrajectoryRecord r;
      r.t = j.at("t").get<double>();
      r.q = json_vec(j.at("q"));
      r.g = json_vec(j.at("g"));
      const Vector ee = json_vec(j.at("ee"));
      if (ee.size() != 3) throw ParseError(path.string(), line_no, "ee needs 3 entries");
      r.ee = ee;
      r.a_rfm_norm = j.at("norm_rfm").get<double>();
      r.a_drift_norm = j.at("norm_drift").get<double>();
      r.a_err_norm = j.at("norm_err").get<double>();
      r.a_tangent_norm = j.at("norm_tangent").get<double>();
      r.a_safe_norm = j.at("norm_safe").get<double>();
      r.null_residual = j.at("null_residual").get<double>();
      r.orth_residual = j.at("orth_residual").get<double>();
      traj.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  if (!have_header) throw ParseError(path.string(), 1, "missing trajectory header");
  return traj;
}

}  // namespace safelayer
