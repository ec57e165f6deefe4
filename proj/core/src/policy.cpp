#include "safelayer/policy.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "logging.hpp"

namespace safelayer {

using Vector2 = Eigen::Vector2d;
using nlohmann::json;

std::string to_string(ActionSpace s) { return s == ActionSpace::joint ? "joint" : "task"; }

ActionSpace action_space_from_string(const std::string& s) {
  if (s == "joint") return ActionSpace::joint;
  if (s == "task") return ActionSpace::task;
  throw DomainError(fmt::format("unknown action space '{}' (expected joint or task)", s));
}

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector3 json_vec3(const json& j) {
  const Vector v = json_vec(j);
  if (v.size() != 3) throw DomainError("expected 3 components");
  return v;
}

json goal_json(const TaskGoal& g) {
  return {{"kind", g.kind == TaskGoal::Kind::reach ? "reach" : "strike"},
          {"target_m", vec_json(g.target)},
          {"direction", vec_json(g.direction)},
          {"speed_mps", g.speed}};
}

TaskGoal json_goal(const json& j) {
  TaskGoal g;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "reach") {
    g.kind = TaskGoal::Kind::reach;
  } else if (kind == "strike") {
    g.kind = TaskGoal::Kind::strike;
  } else {
    throw DomainError(fmt::format("unknown goal kind '{}'", kind));
  }
  g.target = json_vec3(j.at("target_m"));
  g.direction = json_vec3(j.at("direction"));
  g.speed = j.at("speed_mps").get<double>();
  return g;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool inside(const Vector2& p, const Vector2& lo, const Vector2& hi) {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

}  // namespace

void write_action_stream(const ActionStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  json header = {{"format", "safelayer-actions"},
                 {"version", 1},
                 {"space", to_string(stream.space)},
                 {"dim", stream.dim},
                 {"goal", stream.goal ? goal_json(*stream.goal) : json(nullptr)}};
  out << header.dump() << '\n';
  for (const auto& a : stream.actions) {
    if (a.action.size() != stream.dim) throw DomainError("action size does not match stream dim");
    out << json{{"t", a.t}, {"a", vec_json(a.action)}}.dump() << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

ActionStream read_action_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  ActionStream stream;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.at("format") != "safelayer-actions" || j.at("version") != 1) {
          throw ParseError(path.string(), line_no, "not a safelayer-actions v1 stream");
        }
        stream.space = action_space_from_string(j.at("space").get<std::string>());
        stream.dim = j.at("dim").get<int>();
        if (stream.dim < 0) throw DomainError("dim must be >= 0");
        if (!j.at("goal").is_null()) stream.goal = json_goal(j.at("goal"));
        have_header = true;
        continue;
      }
      TimedAction a{j.at("t").get<double>(), json_vec(j.at("a"))};
      if (a.action.size() != stream.dim) {
        throw ParseError(path.string(), line_no,
                         fmt::format("action has {} entries, header says {}", a.action.size(),
                                     stream.dim));
      }
      if (!a.action.allFinite() || !std::isfinite(a.t)) {
        throw ParseError(path.string(), line_no, "non-finite value");
      }
      stream.actions.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const DomainError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return stream;
}

// ---------------------------------------------------------------------------

ScriptedHitPlan::ScriptedHitPlan(const Vector2& start, const Vector2& puck,
                                 const ScriptedHitParams& params)
    : params_(params) {
  if (!(params.hit_speed > 0.0) || !(params.approach_speed > 0.0) || !(params.action_period > 0.0) ||
      !(params.run_up > 0.0) || params.strike_offset < 0.0 || params.follow_through < 0.0) {
    throw DomainError("scripted hit: speeds, period and run-up must be > 0");
  }
  if (!inside(puck, params.reach_min, params.reach_max)) {
    throw DomainError(fmt::format("puck ({:.3f}, {:.3f}) lies outside the table rectangle", puck.x(),
                                  puck.y()));
  }
  const double period = params.action_period;
  const double v = params.hit_speed;
  // A linear ramp of n steps ending at v covers v T (n + 1) / 2.
  n_ramp_ = std::max(1L, std::lround(2.0 * params.run_up / (v * period) - 1.0));
  const double ramp_length = v * period * static_cast<double>(n_ramp_ + 1) / 2.0;

  Vector2 to_goal = params.goal - puck;
  if (to_goal.norm() < 1e-9) throw DomainError("puck coincides with the goal");
  dir_ = to_goal.normalized();
  strike_ = puck - params.strike_offset * dir_;
  Vector2 pre = strike_ - ramp_length * dir_;

  if (!inside(pre, params.reach_min, params.reach_max) ||
      !inside(strike_, params.reach_min, params.reach_max)) {
    detail::warn_throttled("scripted_hit_fallback",
                           fmt::format("strike approach for puck ({:.3f}, {:.3f}) leaves the table "
                                       "rectangle; falling back to a straight-line hit",
                                       puck.x(), puck.y()));
    fallback_ = true;
    Vector2 line = puck - start;
    if (line.norm() < 1e-9) line = dir_;
    dir_ = line.normalized();
    strike_ = puck - params.strike_offset * dir_;
    pre = strike_ - ramp_length * dir_;
    // Ramp straight from the start point when it is closer than the run-up.
    if ((pre - start).dot(dir_) < 0.0) pre = start;
  }

  const Vector2 approach = pre - start;
  const double d = approach.norm();
  if (d > 0.0) {
    n_approach_ = static_cast<long>(std::ceil(d / (params.approach_speed * period) - 1e-12));
    approach_velocity_ = approach / (static_cast<double>(n_approach_) * period);
  } else {
    approach_velocity_.setZero();
  }
  const double cruise = params.strike_offset + params.follow_through;
  n_cruise_ = static_cast<long>(std::ceil(cruise / (v * period) - 1e-12));
}

Vector2 ScriptedHitPlan::action(long index) const {
  if (index < 0) throw DomainError("action index must be >= 0");
  if (index < n_approach_) return approach_velocity_;
  index -= n_approach_;
  if (index < n_ramp_) {
    return params_.hit_speed * static_cast<double>(index + 1) / static_cast<double>(n_ramp_) * dir_;
  }
  index -= n_ramp_;
  if (index < n_cruise_) return params_.hit_speed * dir_;
  return Vector2::Zero();
}

std::vector<Vector2> ScriptedHitPlan::stream(long count) const {
  std::vector<Vector2> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, count)));
  for (long i = 0; i < count; ++i) out.push_back(action(i));
  return out;
}

std::vector<Vector2> policy_scripted_hit(const Vector2& start, const Vector2& puck,
                                         const ScriptedHitParams& params, long count) {
  return ScriptedHitPlan(start, puck, params).stream(count);
}

ScriptedHitPolicy::ScriptedHitPolicy(Vector2 puck, ScriptedHitParams params, double noise,
                                     std::uint64_t seed)
    : puck_(std::move(puck)), params_(std::move(params)), noise_(noise), rng_(seed) {
  if (!(noise >= 0.0)) throw DomainError("noise half-width must be >= 0");
}

std::vector<Vector> ScriptedHitPolicy::next_chunk(const Observation& obs, int chunk_size) {
  if (!plan_) {
    plan_.emplace(obs.ee.head<2>(), puck_, params_);
    start_z_ = obs.ee.z();
  }
  std::vector<Vector> chunk;
  chunk.reserve(static_cast<std::size_t>(chunk_size));
  for (int i = 0; i < chunk_size; ++i, ++index_) {
    Vector a = plan_->action(index_);
    for (Eigen::Index c = 0; c < a.size(); ++c) a[c] += uniform(rng_, -noise_, noise_);
    chunk.push_back(std::move(a));
  }
  return chunk;
}

std::optional<TaskGoal> ScriptedHitPolicy::goal() const {
  if (!plan_) return std::nullopt;
  TaskGoal g;
  g.kind = TaskGoal::Kind::strike;
  g.target = Vector3(plan_->strike_point().x(), plan_->strike_point().y(), start_z_);
  g.direction = Vector3(plan_->direction().x(), plan_->direction().y(), 0.0);
  g.speed = params_.hit_speed;
  return g;
}

// ---------------------------------------------------------------------------

ScriptedReachPolicy::ScriptedReachPolicy(ScriptedReachParams params, double noise,
                                         std::uint64_t seed)
    : params_(std::move(params)), noise_(noise), rng_(seed) {
  if (!(params_.gain > 0.0) || !(params_.max_speed > 0.0) || !(params_.action_period > 0.0)) {
    throw DomainError("scripted reach: gain, max speed and period must be > 0");
  }
  if (!(noise >= 0.0)) throw DomainError("noise half-width must be >= 0");
}

std::vector<Vector> ScriptedReachPolicy::next_chunk(const Observation& obs, int chunk_size) {
  if (!have_z_) {
    target_z_ = obs.ee.z();
    have_z_ = true;
  }
  std::vector<Vector> chunk;
  chunk.reserve(static_cast<std::size_t>(chunk_size));
  Vector2 p = obs.ee.head<2>();
  for (int i = 0; i < chunk_size; ++i) {
    Vector2 v = params_.gain * (params_.target - p);
    if (v.norm() > params_.max_speed) v *= params_.max_speed / v.norm();
    p += params_.action_period * v;
    Vector a = v;
    for (Eigen::Index c = 0; c < a.size(); ++c) a[c] += uniform(rng_, -noise_, noise_);
    chunk.push_back(std::move(a));
  }
  return chunk;
}

std::optional<TaskGoal> ScriptedReachPolicy::goal() const {
  TaskGoal g;
  g.kind = TaskGoal::Kind::reach;
  g.target = Vector3(params_.target.x(), params_.target.y(), target_z_);
  return g;
}

// ---------------------------------------------------------------------------

RandomPolicy::RandomPolicy(Vector lower, Vector upper, std::uint64_t seed, ActionSpace space)
    : lower_(std::move(lower)), upper_(std::move(upper)), rng_(seed), space_(space) {
  if (lower_.size() != upper_.size()) throw DomainError("random policy bounds differ in size");
  if ((lower_.array() > upper_.array()).any()) throw DomainError("random policy needs lower <= upper");
  if (!lower_.allFinite() || !upper_.allFinite()) throw DomainError("random policy bounds not finite");
}

Vector RandomPolicy::sample() {
  Vector a(lower_.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = uniform(rng_, lower_[i], upper_[i]);
  return a;
}

std::vector<Vector> RandomPolicy::next_chunk(const Observation&, int chunk_size) {
  std::vector<Vector> chunk;
  chunk.reserve(static_cast<std::size_t>(chunk_size));
  for (int i = 0; i < chunk_size; ++i) chunk.push_back(sample());
  return chunk;
}

std::vector<Vector> policy_random(const Vector& lower, const Vector& upper, std::uint64_t seed,
                                  long count) {
  RandomPolicy p(lower, upper, seed);
  std::vector<Vector> out;
  for (long i = 0; i < count; ++i) out.push_back(p.sample());
  return out;
}

// ---------------------------------------------------------------------------

ReplayPolicy::ReplayPolicy(ActionStream stream) : stream_(std::move(stream)) {}

std::vector<Vector> ReplayPolicy::next_chunk(const Observation&, int chunk_size) {
  std::vector<Vector> chunk;
  while (next_ < stream_.actions.size() && static_cast<int>(chunk.size()) < chunk_size) {
    chunk.push_back(stream_.actions[next_++].action);
  }
  return chunk;
}

std::unique_ptr<ReplayPolicy> policy_replay(const std::filesystem::path& path) {
  return std::make_unique<ReplayPolicy>(read_action_stream(path));
}

}  // namespace safelayer
