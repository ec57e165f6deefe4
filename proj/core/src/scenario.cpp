#include "safelayer/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "safelayer/geometry.hpp"

namespace safelayer {

using Vector2 = Eigen::Vector2d;

std::string policy_kind(const PolicySpec& spec) {
  static const char* names[] = {"zero", "random", "scripted_hit", "scripted_reach", "replay"};
  return names[spec.params.index()];
}

Matrix3 rotation_from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vector3::UnitZ()) * Eigen::AngleAxisd(pitch, Vector3::UnitY()) *
          Eigen::AngleAxisd(roll, Vector3::UnitX()))
      .toRotationMatrix();
}

int Scenario::substeps() const {
  if (!(policy_rate_hz > 0.0) || !(filter_rate_hz > 0.0)) {
    throw DomainError("policy and filter rates must be > 0");
  }
  const double ratio = filter_rate_hz / policy_rate_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw DomainError(fmt::format("filter rate {} Hz is not an integer multiple of policy rate {} Hz",
                                  filter_rate_hz, policy_rate_hz));
  }
  return static_cast<int>(rounded);
}

long Scenario::total_substeps() const {
  return std::lround(std::floor(duration_s * filter_rate_hz + 1e-9));
}

const Attachment& Scenario::point(std::string_view wanted) const {
  for (const auto& p : points) {
    if (p.name == wanted) return p.attachment;
  }
  throw DomainError(fmt::format("no point named '{}'", wanted));
}

void Scenario::validate() const {
  substeps();
  if (chunk_size < 1) throw DomainError("chunk_size must be >= 1");
  if (!(duration_s >= 0.0)) throw DomainError("duration must be >= 0");
  if (!(ik_damping >= 0.0)) throw DomainError("IK damping must be >= 0");
  filter.validate();
  if (std::abs(filter.substep_dt * filter_rate_hz - 1.0) > 1e-12) {
    throw DomainError("filter substep_dt must equal 1 / filter rate");
  }
  chain.check_configuration(initial_q);
  for (const auto& p : points) chain.check_attachment(p.attachment);
  for (const auto& s : cover.spheres) {
    chain.check_attachment(s.attachment);
    if (!(s.radius >= 0.0)) throw DomainError("sphere radius must be >= 0");
  }
  const bool task = std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ZeroPolicySpec> || std::is_same_v<T, RandomPolicySpec>) {
          return p.space == ActionSpace::task;
        } else {
          return !std::is_same_v<T, ReplaySpec>;
        }
      },
      policy.params);
  if (task) point(ik_point);
  if (const auto* r = std::get_if<RandomPolicySpec>(&policy.params)) {
    const int dim = r->space == ActionSpace::joint ? chain.dof() : 2;
    if (r->lower.size() != dim || r->upper.size() != dim) {
      throw DomainError(fmt::format("random policy bounds need {} entries", dim));
    }
  }
  build_constraints();
}

ConstraintSet Scenario::build_constraints() const {
  std::vector<ConstraintBlock> blocks;
  for (const auto& decl : constraints) {
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, JointLimitDecl>) {
            blocks.push_back(joint_limit_block(chain.lower_limits(), chain.upper_limits(), d.label));
          } else if constexpr (std::is_same_v<T, WorkspaceDecl>) {
            blocks.push_back(workspace_block(chain, cover, d.min, d.max, d.label));
          } else if constexpr (std::is_same_v<T, ObbDecl>) {
            blocks.push_back(obb_block(chain, cover, d.box, d.label));
          } else {
            const AirHockeyAttachments pts{point(d.ee), point(d.wrist), point(d.elbow)};
            const ConstraintSet set = airhockey_blocks(chain, pts, d.table);
            blocks.insert(blocks.end(), set.blocks().begin(), set.blocks().end());
          }
        },
        decl);
  }
  return ConstraintSet(std::move(blocks), chain.dof());
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Reader {
 public:
  Reader(std::string origin, std::filesystem::path base_dir)
      : origin_(std::move(origin)), base_dir_(std::move(base_dir)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ParseError(origin_, n.Mark().is_null() ? 0 : n.Mark().line + 1, msg);
  }

  // Rejects keys outside `allowed` so misspelled or unit-less keys fail loudly.
  void check_keys(const YAML::Node& map, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!ok.count(key)) fail(kv.first, fmt::format("unknown key '{}'", key));
    }
  }

  YAML::Node required(const YAML::Node& map, const char* key) const {
    const YAML::Node n = map[key];
    if (!n) fail(map, fmt::format("missing key '{}'", key));
    return n;
  }

  template <typename T>
  T scalar(const YAML::Node& n, const char* what) const {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, fmt::format("'{}' has the wrong type", what));
    }
  }

  double number(const YAML::Node& map, const char* key) const {
    const double v = scalar<double>(required(map, key), key);
    if (!std::isfinite(v)) fail(map[key], fmt::format("'{}' must be finite", key));
    return v;
  }

  double number_or(const YAML::Node& map, const char* key, double fallback) const {
    return map[key] ? number(map, key) : fallback;
  }

  Vector vector(const YAML::Node& n, const char* what, int size = -1) const {
    if (!n.IsSequence()) fail(n, fmt::format("'{}' must be a list", what));
    if (size >= 0 && static_cast<int>(n.size()) != size) {
      fail(n, fmt::format("'{}' needs {} entries, got {}", what, size, n.size()));
    }
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = scalar<double>(n[i], what);
      if (!std::isfinite(v[static_cast<Eigen::Index>(i)])) fail(n[i], "non-finite entry");
    }
    return v;
  }

  Vector3 vec3(const YAML::Node& map, const char* key) const { return vector(required(map, key), key, 3); }
  Vector2 vec2(const YAML::Node& map, const char* key) const { return vector(required(map, key), key, 2); }

  // rotation_rowmajor (9 numbers) or rpy_rad (3 numbers); identity if absent.
  Matrix3 rotation(const YAML::Node& map, const char* rowmajor_key, const char* rpy_key) const {
    if (map[rowmajor_key] && map[rpy_key]) {
      fail(map, fmt::format("give either '{}' or '{}', not both", rowmajor_key, rpy_key));
    }
    if (map[rowmajor_key]) {
      const Vector v = vector(map[rowmajor_key], rowmajor_key, 9);
      Matrix3 r;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = v[3 * i + j];
      }
      if (!is_rotation(r)) fail(map[rowmajor_key], "not a proper rotation matrix");
      return r;
    }
    if (map[rpy_key]) {
      const Vector v = vector(map[rpy_key], rpy_key, 3);
      return rotation_from_rpy(v[0], v[1], v[2]);
    }
    return Matrix3::Identity();
  }

  Transform transform(const YAML::Node& map) const {
    Transform t = Transform::Identity();
    if (map["translation_m"]) t.translation() = vec3(map, "translation_m");
    t.linear() = rotation(map, "rotation_rowmajor", "rpy_rad");
    return t;
  }

  Attachment attachment(const YAML::Node& map) const {
    Attachment a;
    a.link_index = scalar<int>(required(map, "link"), "link");
    if (map["offset_m"]) a.local_offset = vec3(map, "offset_m");
    return a;
  }

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir_ / path;
  }

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::filesystem::path base_dir_;
};

SerialChain parse_chain(const Reader& r, const YAML::Node& n) {
  r.check_keys(n, {"base", "joints"});
  Transform base = Transform::Identity();
  if (n["base"]) {
    r.check_keys(n["base"], {"translation_m", "rotation_rowmajor", "rpy_rad"});
    base = r.transform(n["base"]);
  }
  const YAML::Node js = r.required(n, "joints");
  if (!js.IsSequence() || js.size() == 0) r.fail(js, "'joints' must be a non-empty list");
  std::vector<RevoluteJoint> joints;
  for (const auto& j : js) {
    r.check_keys(j, {"translation_m", "rotation_rowmajor", "rpy_rad", "axis", "lower_rad",
                     "upper_rad"});
    RevoluteJoint joint;
    joint.origin = r.transform(j);
    joint.axis = r.vec3(j, "axis");
    joint.lower = r.number(j, "lower_rad");
    joint.upper = r.number(j, "upper_rad");
    joints.push_back(joint);
  }
  try {
    return SerialChain(base, std::move(joints));
  } catch (const DomainError& e) {
    r.fail(n, fmt::format("invalid chain: {}", e.what()));
  }
}

void parse_constraints(const Reader& r, const YAML::Node& list, std::vector<ConstraintDecl>& out) {
  if (!list.IsSequence()) r.fail(list, "'constraints' must be a list");
  for (const auto& c : list) {
    const auto type = r.scalar<std::string>(r.required(c, "type"), "type");
    if (type == "joint_limits") {
      r.check_keys(c, {"type", "label"});
      JointLimitDecl d;
      if (c["label"]) d.label = r.scalar<std::string>(c["label"], "label");
      out.emplace_back(d);
    } else if (type == "workspace") {
      r.check_keys(c, {"type", "label", "min_m", "max_m"});
      WorkspaceDecl d;
      if (c["label"]) d.label = r.scalar<std::string>(c["label"], "label");
      d.min = r.vec3(c, "min_m");
      d.max = r.vec3(c, "max_m");
      if ((d.min.array() >= d.max.array()).any()) r.fail(c, "workspace needs min_m < max_m");
      out.emplace_back(d);
    } else if (type == "obb") {
      r.check_keys(c, {"type", "label", "center_m", "rotation_rowmajor", "rpy_rad", "extents_m"});
      ObbDecl d;
      if (c["label"]) d.label = r.scalar<std::string>(c["label"], "label");
      d.box.center = r.vec3(c, "center_m");
      d.box.rotation = r.rotation(c, "rotation_rowmajor", "rpy_rad");
      d.box.extents = r.vec3(c, "extents_m");
      try {
        d.box.validate();
      } catch (const DomainError& e) {
        r.fail(c, e.what());
      }
      out.emplace_back(d);
    } else if (type == "obb_file") {
      r.check_keys(c, {"type", "label", "path"});
      const auto path = r.resolve(r.scalar<std::string>(r.required(c, "path"), "path"));
      const std::string label = c["label"] ? r.scalar<std::string>(c["label"], "label") : "obb";
      const auto boxes = import_constraints(path);
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        out.emplace_back(ObbDecl{boxes[i], fmt::format("{}_{}", label, i)});
      }
    } else if (type == "airhockey") {
      r.check_keys(c, {"type", "ee", "wrist", "elbow", "z_low_m", "z_high_m", "x_low_m", "y_low_m",
                       "y_high_m", "z_wrist_low_m", "z_elbow_low_m"});
      AirHockeyDecl d;
      if (c["ee"]) d.ee = r.scalar<std::string>(c["ee"], "ee");
      if (c["wrist"]) d.wrist = r.scalar<std::string>(c["wrist"], "wrist");
      if (c["elbow"]) d.elbow = r.scalar<std::string>(c["elbow"], "elbow");
      auto& t = d.table;
      t.z_low = r.number(c, "z_low_m");
      t.z_high = r.number(c, "z_high_m");
      t.x_low = r.number(c, "x_low_m");
      t.y_low = r.number(c, "y_low_m");
      t.y_high = r.number(c, "y_high_m");
      t.z_wrist_low = r.number(c, "z_wrist_low_m");
      t.z_elbow_low = r.number(c, "z_elbow_low_m");
      if (!(t.z_low < t.z_high) || !(t.y_low < t.y_high)) r.fail(c, "table bounds are inverted");
      out.emplace_back(d);
    } else {
      r.fail(c["type"], fmt::format("unknown constraint type '{}'", type));
    }
  }
}

PolicySpec parse_policy(const Reader& r, const YAML::Node& n) {
  PolicySpec spec;
  const auto kind = r.scalar<std::string>(r.required(n, "kind"), "kind");
  if (n["seed"]) spec.seed = r.scalar<std::uint64_t>(n["seed"], "seed");
  auto space = [&](ActionSpace fallback) {
    if (!n["space"]) return fallback;
    try {
      return action_space_from_string(r.scalar<std::string>(n["space"], "space"));
    } catch (const DomainError& e) {
      r.fail(n["space"], e.what());
    }
  };
  if (kind == "zero") {
    r.check_keys(n, {"kind", "seed", "space"});
    spec.params = ZeroPolicySpec{space(ActionSpace::joint)};
  } else if (kind == "random") {
    r.check_keys(n, {"kind", "seed", "space", "lower_per_s", "upper_per_s"});
    RandomPolicySpec p;
    p.space = space(ActionSpace::joint);
    p.lower = r.vector(r.required(n, "lower_per_s"), "lower_per_s");
    p.upper = r.vector(r.required(n, "upper_per_s"), "upper_per_s");
    if (p.lower.size() != p.upper.size() || (p.lower.array() > p.upper.array()).any()) {
      r.fail(n, "random policy needs lower_per_s <= upper_per_s of equal length");
    }
    spec.params = p;
  } else if (kind == "scripted_hit") {
    r.check_keys(n, {"kind", "seed", "puck_min_m", "puck_max_m", "goal_m", "hit_speed_mps",
                     "approach_speed_mps", "strike_offset_m", "run_up_m", "follow_through_m",
                     "table_min_m", "table_max_m", "noise_fraction"});
    ScriptedHitSpec p;
    auto& h = p.params;
    if (n["puck_min_m"]) p.puck_min = r.vec2(n, "puck_min_m");
    if (n["puck_max_m"]) p.puck_max = r.vec2(n, "puck_max_m");
    if (n["goal_m"]) h.goal = r.vec2(n, "goal_m");
    h.hit_speed = r.number_or(n, "hit_speed_mps", h.hit_speed);
    h.approach_speed = r.number_or(n, "approach_speed_mps", h.approach_speed);
    h.strike_offset = r.number_or(n, "strike_offset_m", h.strike_offset);
    h.run_up = r.number_or(n, "run_up_m", h.run_up);
    h.follow_through = r.number_or(n, "follow_through_m", h.follow_through);
    if (n["table_min_m"]) h.reach_min = r.vec2(n, "table_min_m");
    if (n["table_max_m"]) h.reach_max = r.vec2(n, "table_max_m");
    p.noise_fraction = r.number_or(n, "noise_fraction", 0.0);
    if ((p.puck_min.array() > p.puck_max.array()).any()) r.fail(n, "puck_min_m > puck_max_m");
    if (!(h.hit_speed > 0.0) || !(h.approach_speed > 0.0) || !(h.run_up > 0.0)) {
      r.fail(n, "hit speed, approach speed and run-up must be > 0");
    }
    if (p.noise_fraction < 0.0) r.fail(n, "noise_fraction must be >= 0");
    spec.params = p;
  } else if (kind == "scripted_reach") {
    r.check_keys(n, {"kind", "seed", "target_min_m", "target_max_m", "gain_per_s",
                     "max_speed_mps", "noise_mps"});
    ScriptedReachSpec p;
    p.target_min = r.vec2(n, "target_min_m");
    p.target_max = r.vec2(n, "target_max_m");
    p.params.gain = r.number_or(n, "gain_per_s", p.params.gain);
    p.params.max_speed = r.number_or(n, "max_speed_mps", p.params.max_speed);
    p.noise_mps = r.number_or(n, "noise_mps", 0.0);
    if ((p.target_min.array() > p.target_max.array()).any()) r.fail(n, "target_min_m > target_max_m");
    if (!(p.params.gain > 0.0) || !(p.params.max_speed > 0.0) || p.noise_mps < 0.0) {
      r.fail(n, "reach gain and speed must be > 0, noise >= 0");
    }
    spec.params = p;
  } else if (kind == "replay") {
    r.check_keys(n, {"kind", "seed", "path"});
    spec.params = ReplaySpec{r.resolve(r.scalar<std::string>(r.required(n, "path"), "path"))};
  } else {
    r.fail(n["kind"], fmt::format("unknown policy kind '{}'", kind));
  }
  return spec;
}

SuccessSpec parse_success(const Reader& r, const YAML::Node& n) {
  r.check_keys(n, {"kind", "tolerance_m", "speed_fraction", "lateral_tolerance_m", "require_safe"});
  SuccessSpec s;
  const auto kind = r.scalar<std::string>(r.required(n, "kind"), "kind");
  if (kind == "none") {
    s.kind = SuccessSpec::Kind::none;
  } else if (kind == "reach") {
    s.kind = SuccessSpec::Kind::reach;
  } else if (kind == "strike") {
    s.kind = SuccessSpec::Kind::strike;
  } else {
    r.fail(n["kind"], fmt::format("unknown success kind '{}'", kind));
  }
  s.tolerance_m = r.number_or(n, "tolerance_m", s.tolerance_m);
  s.speed_fraction = r.number_or(n, "speed_fraction", s.speed_fraction);
  s.lateral_tolerance_m = r.number_or(n, "lateral_tolerance_m", s.lateral_tolerance_m);
  if (n["require_safe"]) s.require_safe = r.scalar<bool>(n["require_safe"], "require_safe");
  return s;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin,
                        const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(origin, e.mark.line + 1, e.msg);
  }
  const Reader r(origin, base_dir);
  if (!root.IsMap()) throw ParseError(origin, 1, "scenario must be a mapping");
  r.check_keys(root, {"name", "chain", "points", "spheres", "constraints", "initial_q_rad", "policy",
                      "ik", "rates", "duration_s", "filter", "success"});

  Scenario sc;
  sc.name = root["name"] ? r.scalar<std::string>(root["name"], "name") : "unnamed";
  sc.chain = parse_chain(r, r.required(root, "chain"));

  if (root["points"]) {
    const YAML::Node pts = root["points"];
    if (!pts.IsMap()) r.fail(pts, "'points' must map names to attachments");
    for (const auto& kv : pts) {
      r.check_keys(kv.second, {"link", "offset_m"});
      NamedPoint p{kv.first.as<std::string>(), r.attachment(kv.second)};
      try {
        sc.chain.check_attachment(p.attachment);
      } catch (const DomainError& e) {
        r.fail(kv.second, e.what());
      }
      sc.points.push_back(std::move(p));
    }
  }
  if (root["spheres"]) {
    const YAML::Node sp = root["spheres"];
    if (!sp.IsSequence()) r.fail(sp, "'spheres' must be a list");
    for (const auto& s : sp) {
      r.check_keys(s, {"link", "offset_m", "radius_m"});
      Sphere sphere{r.attachment(s), r.number(s, "radius_m")};
      try {
        sc.chain.check_attachment(sphere.attachment);
      } catch (const DomainError& e) {
        r.fail(s, e.what());
      }
      if (!(sphere.radius >= 0.0)) r.fail(s, "radius_m must be >= 0");
      sc.cover.spheres.push_back(sphere);
    }
  }
  if (root["constraints"]) parse_constraints(r, root["constraints"], sc.constraints);

  sc.initial_q = r.vector(r.required(root, "initial_q_rad"), "initial_q_rad", sc.chain.dof());
  sc.policy = parse_policy(r, r.required(root, "policy"));

  if (root["ik"]) {
    const YAML::Node ik = root["ik"];
    r.check_keys(ik, {"point", "damping"});
    if (ik["point"]) sc.ik_point = r.scalar<std::string>(ik["point"], "point");
    sc.ik_damping = r.number_or(ik, "damping", sc.ik_damping);
  }

  const YAML::Node rates = r.required(root, "rates");
  r.check_keys(rates, {"policy_hz", "filter_hz", "chunk_size"});
  sc.policy_rate_hz = r.number(rates, "policy_hz");
  sc.filter_rate_hz = r.number(rates, "filter_hz");
  sc.chunk_size = r.scalar<int>(r.required(rates, "chunk_size"), "chunk_size");
  if (!(sc.policy_rate_hz > 0.0) || !(sc.filter_rate_hz > 0.0)) r.fail(rates, "rates must be > 0");
  if (sc.chunk_size < 1) r.fail(rates["chunk_size"], "chunk_size must be >= 1");
  sc.duration_s = r.number(root, "duration_s");

  sc.filter.substep_dt = 1.0 / sc.filter_rate_hz;
  if (root["filter"]) {
    const YAML::Node f = root["filter"];
    r.check_keys(f, {"slack_beta", "slack_tolerance", "error_gain_per_s", "drift_clip_rad_per_s",
                     "null_rank_tol"});
    sc.filter.slack_beta = r.number_or(f, "slack_beta", sc.filter.slack_beta);
    sc.filter.slack_tolerance = r.number_or(f, "slack_tolerance", sc.filter.slack_tolerance);
    sc.filter.error_gain = r.number_or(f, "error_gain_per_s", sc.filter.error_gain);
    sc.filter.null_rank_tol = r.number_or(f, "null_rank_tol", sc.filter.null_rank_tol);
    if (f["drift_clip_rad_per_s"]) {
      if (f["drift_clip_rad_per_s"].IsNull()) {
        sc.filter.drift_clip.reset();
      } else {
        sc.filter.drift_clip = r.number(f, "drift_clip_rad_per_s");
      }
    }
    try {
      sc.filter.validate();
    } catch (const DomainError& e) {
      r.fail(f, e.what());
    }
  }
  if (root["success"]) sc.success = parse_success(r, root["success"]);

  // Scripted policies act once per policy period.
  const double period = 1.0 / sc.policy_rate_hz;
  if (auto* h = std::get_if<ScriptedHitSpec>(&sc.policy.params)) h->params.action_period = period;
  if (auto* p = std::get_if<ScriptedReachSpec>(&sc.policy.params)) p->params.action_period = period;
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Dumping. Doubles are written in shortest round-trip form.

namespace {

std::string num(double v) { return fmt::format("{}", v); }

void emit_vec(YAML::Emitter& e, const Eigen::Ref<const Vector>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) e << num(v[i]);
  e << YAML::EndSeq;
}

void emit_rotation(YAML::Emitter& e, const Matrix3& r) {
  e << YAML::Key << "rotation_rowmajor" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) e << num(r(i, j));
  }
  e << YAML::EndSeq;
}

void emit_attachment(YAML::Emitter& e, const Attachment& a) {
  e << YAML::Key << "link" << YAML::Value << a.link_index;
  e << YAML::Key << "offset_m" << YAML::Value;
  emit_vec(e, a.local_offset);
}

}  // namespace

std::string dump_scenario(const Scenario& sc) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << sc.name;

  e << YAML::Key << "chain" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "base" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "translation_m" << YAML::Value;
  emit_vec(e, sc.chain.base_pose().translation());
  emit_rotation(e, sc.chain.base_pose().linear());
  e << YAML::EndMap;
  e << YAML::Key << "joints" << YAML::Value << YAML::BeginSeq;
  for (const auto& j : sc.chain.joints()) {
    e << YAML::BeginMap;
    e << YAML::Key << "translation_m" << YAML::Value;
    emit_vec(e, j.origin.translation());
    emit_rotation(e, j.origin.linear());
    e << YAML::Key << "axis" << YAML::Value;
    emit_vec(e, j.axis);
    e << YAML::Key << "lower_rad" << YAML::Value << num(j.lower);
    e << YAML::Key << "upper_rad" << YAML::Value << num(j.upper);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq << YAML::EndMap;

  if (!sc.points.empty()) {
    e << YAML::Key << "points" << YAML::Value << YAML::BeginMap;
    for (const auto& p : sc.points) {
      e << YAML::Key << p.name << YAML::Value << YAML::Flow << YAML::BeginMap;
      emit_attachment(e, p.attachment);
      e << YAML::EndMap;
    }
    e << YAML::EndMap;
  }
  if (!sc.cover.empty()) {
    e << YAML::Key << "spheres" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : sc.cover.spheres) {
      e << YAML::Flow << YAML::BeginMap;
      emit_attachment(e, s.attachment);
      e << YAML::Key << "radius_m" << YAML::Value << num(s.radius);
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }

  e << YAML::Key << "constraints" << YAML::Value << YAML::BeginSeq;
  for (const auto& decl : sc.constraints) {
    e << YAML::BeginMap;
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, JointLimitDecl>) {
            e << YAML::Key << "type" << YAML::Value << "joint_limits";
            e << YAML::Key << "label" << YAML::Value << d.label;
          } else if constexpr (std::is_same_v<T, WorkspaceDecl>) {
            e << YAML::Key << "type" << YAML::Value << "workspace";
            e << YAML::Key << "label" << YAML::Value << d.label;
            e << YAML::Key << "min_m" << YAML::Value;
            emit_vec(e, d.min);
            e << YAML::Key << "max_m" << YAML::Value;
            emit_vec(e, d.max);
          } else if constexpr (std::is_same_v<T, ObbDecl>) {
            e << YAML::Key << "type" << YAML::Value << "obb";
            e << YAML::Key << "label" << YAML::Value << d.label;
            e << YAML::Key << "center_m" << YAML::Value;
            emit_vec(e, d.box.center);
            emit_rotation(e, d.box.rotation);
            e << YAML::Key << "extents_m" << YAML::Value;
            emit_vec(e, d.box.extents);
          } else {
            const auto& t = d.table;
            e << YAML::Key << "type" << YAML::Value << "airhockey";
            e << YAML::Key << "ee" << YAML::Value << d.ee;
            e << YAML::Key << "wrist" << YAML::Value << d.wrist;
            e << YAML::Key << "elbow" << YAML::Value << d.elbow;
            e << YAML::Key << "z_low_m" << YAML::Value << num(t.z_low);
            e << YAML::Key << "z_high_m" << YAML::Value << num(t.z_high);
            e << YAML::Key << "x_low_m" << YAML::Value << num(t.x_low);
            e << YAML::Key << "y_low_m" << YAML::Value << num(t.y_low);
            e << YAML::Key << "y_high_m" << YAML::Value << num(t.y_high);
            e << YAML::Key << "z_wrist_low_m" << YAML::Value << num(t.z_wrist_low);
            e << YAML::Key << "z_elbow_low_m" << YAML::Value << num(t.z_elbow_low);
          }
        },
        decl);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "initial_q_rad" << YAML::Value;
  emit_vec(e, sc.initial_q);

  e << YAML::Key << "policy" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << policy_kind(sc.policy);
  e << YAML::Key << "seed" << YAML::Value << sc.policy.seed;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ZeroPolicySpec>) {
          e << YAML::Key << "space" << YAML::Value << to_string(p.space);
        } else if constexpr (std::is_same_v<T, RandomPolicySpec>) {
          e << YAML::Key << "space" << YAML::Value << to_string(p.space);
          e << YAML::Key << "lower_per_s" << YAML::Value;
          emit_vec(e, p.lower);
          e << YAML::Key << "upper_per_s" << YAML::Value;
          emit_vec(e, p.upper);
        } else if constexpr (std::is_same_v<T, ScriptedHitSpec>) {
          const auto& h = p.params;
          e << YAML::Key << "puck_min_m" << YAML::Value;
          emit_vec(e, p.puck_min);
          e << YAML::Key << "puck_max_m" << YAML::Value;
          emit_vec(e, p.puck_max);
          e << YAML::Key << "goal_m" << YAML::Value;
          emit_vec(e, h.goal);
          e << YAML::Key << "hit_speed_mps" << YAML::Value << num(h.hit_speed);
          e << YAML::Key << "approach_speed_mps" << YAML::Value << num(h.approach_speed);
          e << YAML::Key << "strike_offset_m" << YAML::Value << num(h.strike_offset);
          e << YAML::Key << "run_up_m" << YAML::Value << num(h.run_up);
          e << YAML::Key << "follow_through_m" << YAML::Value << num(h.follow_through);
          e << YAML::Key << "table_min_m" << YAML::Value;
          emit_vec(e, h.reach_min);
          e << YAML::Key << "table_max_m" << YAML::Value;
          emit_vec(e, h.reach_max);
          e << YAML::Key << "noise_fraction" << YAML::Value << num(p.noise_fraction);
        } else if constexpr (std::is_same_v<T, ScriptedReachSpec>) {
          e << YAML::Key << "target_min_m" << YAML::Value;
          emit_vec(e, p.target_min);
          e << YAML::Key << "target_max_m" << YAML::Value;
          emit_vec(e, p.target_max);
          e << YAML::Key << "gain_per_s" << YAML::Value << num(p.params.gain);
          e << YAML::Key << "max_speed_mps" << YAML::Value << num(p.params.max_speed);
          e << YAML::Key << "noise_mps" << YAML::Value << num(p.noise_mps);
        } else {
          e << YAML::Key << "path" << YAML::Value << std::filesystem::absolute(p.path).string();
        }
      },
      sc.policy.params);
  e << YAML::EndMap;

  e << YAML::Key << "ik" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "point" << YAML::Value << sc.ik_point;
  e << YAML::Key << "damping" << YAML::Value << num(sc.ik_damping);
  e << YAML::EndMap;

  e << YAML::Key << "rates" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "policy_hz" << YAML::Value << num(sc.policy_rate_hz);
  e << YAML::Key << "filter_hz" << YAML::Value << num(sc.filter_rate_hz);
  e << YAML::Key << "chunk_size" << YAML::Value << sc.chunk_size;
  e << YAML::EndMap;
  e << YAML::Key << "duration_s" << YAML::Value << num(sc.duration_s);

  e << YAML::Key << "filter" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "slack_beta" << YAML::Value << num(sc.filter.slack_beta);
  e << YAML::Key << "slack_tolerance" << YAML::Value << num(sc.filter.slack_tolerance);
  e << YAML::Key << "error_gain_per_s" << YAML::Value << num(sc.filter.error_gain);
  e << YAML::Key << "drift_clip_rad_per_s" << YAML::Value;
  if (sc.filter.drift_clip) {
    e << num(*sc.filter.drift_clip);
  } else {
    e << YAML::Null;
  }
  e << YAML::Key << "null_rank_tol" << YAML::Value << num(sc.filter.null_rank_tol);
  e << YAML::EndMap;

  static const char* success_kinds[] = {"none", "reach", "strike"};
  e << YAML::Key << "success" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << success_kinds[static_cast<int>(sc.success.kind)];
  e << YAML::Key << "tolerance_m" << YAML::Value << num(sc.success.tolerance_m);
  e << YAML::Key << "speed_fraction" << YAML::Value << num(sc.success.speed_fraction);
  e << YAML::Key << "lateral_tolerance_m" << YAML::Value << num(sc.success.lateral_tolerance_m);
  e << YAML::Key << "require_safe" << YAML::Value << sc.success.require_safe;
  e << YAML::EndMap;

  e << YAML::EndMap;
  if (!e.good()) throw std::runtime_error(fmt::format("yaml emitter: {}", e.GetLastError()));
  return std::string(e.c_str()) + "\n";
}

void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out << dump_scenario(sc);
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace safelayer
