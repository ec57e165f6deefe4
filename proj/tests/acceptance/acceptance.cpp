// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
// below. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "oracles.hpp"
#include "safelayer/atacom.hpp"
#include "safelayer/diagnostics.hpp"
#include "safelayer/geometry.hpp"
#include "safelayer/harness.hpp"
#include "safelayer/scenario.hpp"

using namespace safelayer;
namespace cli = safelayer::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = SAFELAYER_CONFIG_DIR;
const fs::path kAirHockey = kConfigs / "airhockey_iiwa.yaml";
const fs::path kManipulation = kConfigs / "manipulation_planar.yaml";

// Criterion 1
constexpr int kSafetyEpisodes = 500;
constexpr double kMaxFilteredViolation = 1e-3;  // metric and joint blocks alike
constexpr double kMinUnfilteredViolatingFraction = 0.5;
constexpr double kSafetyRuntimeLimitS = 120.0;
constexpr double kNoiseFraction = 0.5;
// Criterion 2
constexpr int kReachEpisodes = 200;
constexpr double kMinSuccessRatio = 0.9;
// Criterion 3
constexpr int kObbPairs = 1000;
constexpr long kOracleSamples = 1000000;
constexpr double kObbDistanceTol = 2e-3;
constexpr double kObbGradientTol = 1e-4;
constexpr double kObbGradientMinDistance = 1e-6;
// Criterion 4
constexpr int kJacobianConfigs = 100;
constexpr double kJacobianTol = 1e-4;
// Criterion 5
constexpr double kResidualTol = 1e-8;
// Criterion 6
constexpr double kInjectedViolation = 0.05;
constexpr double kMonotoneSlack = 1e-9;
// Criterion 7
constexpr int kInteriorStates = 100;
constexpr double kInteriorMargin = -0.5;
constexpr double kMinCosine = 0.99;
// Criterion 8
constexpr double kExtentTol = 1e-6;
constexpr double kPixelTol = 0.5;

struct Outcome {
  bool passed = false;
  std::string detail;
};

fs::path work_dir() {
  static const fs::path dir = oracle::temp_dir("acceptance");
  return dir;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<oracle::CsvRow> episode_rows(const fs::path& csv) {
  auto rows = oracle::read_csv(csv);
  if (!rows.empty() && rows.back().at("episode") == "summary") rows.pop_back();
  return rows;
}

// Runs both modes through the command-line entry point.
int sweep(const fs::path& scenario, int episodes, const fs::path& out, int n_jobs) {
  cli::RunSpec spec;
  spec.scenario = scenario;
  spec.episodes = episodes;
  spec.seed = 0;
  spec.mode = cli::Mode::both;
  spec.out_dir = out;
  spec.jobs = n_jobs;
  spec.write_logs = false;
  std::ostringstream sink;
  const int rc = cli::cmd_run(spec, sink);
  if (rc != 0) std::cerr << sink.str();
  return rc;
}

Outcome criterion1() {
  const Scenario sc = load_scenario(kAirHockey);
  const auto& hit = std::get<ScriptedHitSpec>(sc.policy.params);
  if (hit.noise_fraction != kNoiseFraction) {
    return {false, fmt::format("config noise fraction {} != {}", hit.noise_fraction, kNoiseFraction)};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = sweep(kAirHockey, kSafetyEpisodes, work_dir() / "c1", jobs());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rc != 0) return {false, fmt::format("run exited with {}", rc)};

  const auto filtered = episode_rows(work_dir() / "c1" / cli::metrics_file_name(true));
  const auto raw = episode_rows(work_dir() / "c1" / cli::metrics_file_name(false));
  if (filtered.size() != kSafetyEpisodes || raw.size() != kSafetyEpisodes) {
    return {false, "wrong row count"};
  }
  double worst = -1e300;
  int bad = 0;
  for (const auto& row : filtered) {
    double m = -1e300;
    for (const auto& [key, value] : row) {
      if (key.rfind("max_g_", 0) == 0) m = std::max(m, std::stod(value));
    }
    worst = std::max(worst, m);
    bad += m > kMaxFilteredViolation ? 1 : 0;
  }
  const long violating = std::count_if(raw.begin(), raw.end(), [](const oracle::CsvRow& r) {
    return std::stol(r.at("violation_steps")) > 0;
  });
  const double frac = static_cast<double>(violating) / kSafetyEpisodes;
  const bool ok = bad == 0 && frac >= kMinUnfilteredViolatingFraction && secs < kSafetyRuntimeLimitS;
  return {ok, fmt::format("filtered worst per-block max g {:.3e} ({} episodes > {:g}); unfiltered "
                          "violating {}/{} ({:.1f}%); runtime {:.1f} s",
                          worst, bad, kMaxFilteredViolation, violating, kSafetyEpisodes, 100 * frac,
                          secs)};
}

Outcome criterion2() {
  const int rc = sweep(kManipulation, kReachEpisodes, work_dir() / "c2", jobs());
  if (rc != 0) return {false, fmt::format("run exited with {}", rc)};
  const auto rate = [](const fs::path& csv, const char* column) {
    const auto rows = episode_rows(csv);
    double s = 0.0;
    for (const auto& r : rows) s += std::stod(r.at(column));
    return s / static_cast<double>(rows.size());
  };
  const fs::path f = work_dir() / "c2" / cli::metrics_file_name(true);
  const fs::path u = work_dir() / "c2" / cli::metrics_file_name(false);
  const double tf = rate(f, "task_success"), tu = rate(u, "task_success");
  const double sf = rate(f, "success"), su = rate(u, "success");
  const bool ok = tu > 0.0 && tf >= kMinSuccessRatio * tu;
  return {ok, fmt::format("task success filtered {:.3f} vs unfiltered {:.3f} (ratio {:.3f}, need "
                          ">= {}); safe success {:.3f} vs {:.3f}",
                          tf, tu, tu > 0 ? tf / tu : 0.0, kMinSuccessRatio, sf, su)};
}

Outcome criterion3() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ext(0.1, 0.6), rad(0.0, 0.1);
  double worst_d = 0.0, worst_grad = 0.0;
  int pairs = 0, grad_checked = 0;
  while (pairs < kObbPairs) {
    OrientedBBox box;
    box.center = Vector3(u(rng), u(rng), u(rng));
    box.rotation = oracle::random_rotation(rng);
    box.extents = Vector3(ext(rng), ext(rng), ext(rng));
    const Vector3 x = box.center + Vector3(u(rng), u(rng), u(rng));
    const double r = rad(rng);
    // Shrunk center, written out from the definition.
    const Vector3 x_bb = box.rotation.transpose() * (x - box.center);
    if (x_bb.norm() < kObbCenterEpsilon || r >= x_bb.norm()) continue;
    const Vector3 shrunk = (1.0 - r / x_bb.norm()) * x_bb;
    if (((shrunk.cwiseAbs() - box.extents / 2.0).array() <= 0.0).all()) continue;  // inside

    const ObbDistance d = obb_distance(x, r, box);
    worst_d = std::max(worst_d, std::abs(d.distance - oracle::surface_sample_distance(
                                                         shrunk, box.extents, kOracleSamples)));
    if (d.distance > kObbGradientMinDistance) {
      const Eigen::MatrixXd fd = oracle::fd_jacobian(
          [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            return Eigen::VectorXd::Constant(1, obb_distance(Vector3(p), r, box).distance);
          },
          Eigen::VectorXd(x));
      worst_grad = std::max(worst_grad, oracle::rel_err(d.gradient.transpose(), fd));
      ++grad_checked;
    }
    ++pairs;
  }
  const bool ok = worst_d <= kObbDistanceTol && worst_grad <= kObbGradientTol;
  return {ok, fmt::format("{} pairs: worst |d - oracle| {:.3e} (tol {:g}); worst gradient rel err "
                          "{:.3e} over {} pairs (tol {:g})",
                          pairs, worst_d, kObbDistanceTol, worst_grad, grad_checked, kObbGradientTol)};
}

Outcome criterion4() {
  std::mt19937_64 rng(4);
  bool ok = true;
  std::string detail;
  for (const fs::path& path : {kManipulation, kAirHockey}) {
    const Scenario sc = load_scenario(path);
    const ConstraintSet set = sc.build_constraints();
    const Vector lo = sc.chain.lower_limits(), hi = sc.chain.upper_limits();
    for (const auto& block : set.blocks()) {
      double worst = 0.0;
      for (int i = 0; i < kJacobianConfigs; ++i) {
        Vector q(lo.size());
        for (Eigen::Index j = 0; j < q.size(); ++j) {
          q[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
        }
        worst = std::max(worst, jacobian_fd_error(block, q));
      }
      ok = ok && worst <= kJacobianTol;
      detail += fmt::format("{}{}:{:.1e}", detail.empty() ? "" : ", ", block.label(), worst);
    }
  }
  return {ok, fmt::format("worst rel err per block (tol {:g}): {}", kJacobianTol, detail)};
}

Outcome criterion5() {
  double worst_null = 0.0, worst_orth = 0.0;
  long rows = 0;
  for (const char* run : {"c1", "c2"}) {
    const fs::path csv = work_dir() / run / cli::metrics_file_name(true);
    if (!fs::exists(csv)) return {false, fmt::format("missing {} (criteria 1-2 did not run)", csv.string())};
    for (const auto& r : episode_rows(csv)) {
      worst_null = std::max(worst_null, std::stod(r.at("max_null_residual")));
      worst_orth = std::max(worst_orth, std::stod(r.at("max_orth_residual")));
      ++rows;
    }
  }
  const bool ok = rows > 0 && worst_null <= kResidualTol && worst_orth <= kResidualTol;
  return {ok, fmt::format("{} filtered episodes: max ||J_c B|| {:.2e}, max ||B'B - I|| {:.2e} (tol {:g})",
                          rows, worst_null, worst_orth, kResidualTol)};
}

// The bound behind the most critical row (largest g among rows with a
// nonzero gradient at q0) is tightened so that the row reads +0.05 at q0.
struct Injection {
  ConstraintBlock block;
  Vector q;
  int row = -1;
  bool moved_state = false;
};

// Start the block at +kInjectedViolation on its least-slack row. Newton steps
// on q move the state there when the row can reach that value. Rows that are
// never positive (box clearance) get the bound tightened instead: shifting a
// single row only shrinks the feasible set.
Injection inject_violation(const ConstraintBlock& block, const Vector& q0) {
  const ConstraintEvaluation e = block.evaluate(q0);
  int row = -1;
  for (int i = 0; i < block.rows(); ++i) {
    if (e.jacobian.row(i).norm() < 1e-6) continue;
    if (row < 0 || e.g[i] > e.g[row]) row = i;
  }
  if (row < 0) throw std::runtime_error("block has no row with a nonzero gradient");

  Vector q = q0;
  for (int it = 0; it < 100; ++it) {
    const ConstraintEvaluation ei = block.evaluate(q);
    const double r = kInjectedViolation - ei.g[row];
    if (std::abs(r) < 1e-12) return {block, q, row, true};
    const Vector grad = ei.jacobian.row(row).transpose();
    if (grad.squaredNorm() < 1e-12) break;
    q += std::clamp(r, -0.05, 0.05) * grad / grad.squaredNorm();
  }

  const double shift = kInjectedViolation - e.g[row];
  ConstraintBlock shifted(block.kind(), block.label(), block.rows(), block.dof(),
                          [block, row, shift](const Vector& qq, Eigen::Ref<Vector> g, Eigen::Ref<Matrix> j) {
                            block.evaluate_into(qq, g, j);
                            g[row] += shift;
                          });
  return {shifted, q0, row, false};
}

Outcome criterion6() {
  bool ok = true;
  std::string detail;
  for (const fs::path& path : {kManipulation, kAirHockey}) {
    const Scenario sc = load_scenario(path);
    const FilterConfig& cfg = sc.filter;
    const long limit = static_cast<long>(std::ceil(5.0 / (cfg.error_gain * cfg.substep_dt)));
    const ConstraintSet set = sc.build_constraints();
    for (const auto& block : set.blocks()) {
      const Injection inj = inject_violation(block, sc.initial_q);
      const ConstraintSet one = stack({inj.block});
      const std::vector<Vector> zeros(static_cast<std::size_t>(limit), Vector::Zero(sc.chain.dof()));
      const auto run = multirate_execute(Plant{}, JointState::at_rest(inj.q), zeros, one, cfg, 1);
      double prev = one.evaluate(inj.q).g.maxCoeff();
      const double start = prev;
      bool monotone = true;
      long reached = -1;
      for (std::size_t k = 0; k < run.log.size(); ++k) {
        const double m = run.log[k].g.maxCoeff();
        monotone = monotone && m <= prev + kMonotoneSlack;
        if (reached < 0 && m <= cfg.slack_tolerance) reached = static_cast<long>(k) + 1;
        prev = m;
      }
      const bool pass = monotone && reached > 0 && prev <= cfg.slack_tolerance;
      ok = ok && pass;
      detail += fmt::format("{}{}/{} row {} ({}, start {:.3f}): {} in {} of {} substeps{}",
                            detail.empty() ? "" : "; ", sc.name, block.label(), inj.row,
                            inj.moved_state ? "state" : "bound", start, pass ? "recovered" : "NOT recovered",
                            reached < 0 ? std::string("-") : std::to_string(reached), limit,
                            monotone ? "" : " (non-monotone)");
    }
  }
  return {ok, detail};
}

Outcome criterion7() {
  const Scenario sc = load_scenario(kManipulation);
  const ConstraintSet set = sc.build_constraints();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  const Vector lo = sc.chain.lower_limits(), hi = sc.chain.upper_limits();
  double worst = 1.0;
  int states = 0;
  long draws = 0;
  while (states < kInteriorStates && draws < 1000000) {
    ++draws;
    Vector q(lo.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      q[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
    }
    const ConstraintEvaluation e = set.evaluate(q);
    if (e.g.maxCoeff() > kInteriorMargin) continue;
    Vector a(q.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = n(rng);
    const Vector s = filter_action(e, a, sc.filter).a_safe;
    worst = std::min(worst, s.dot(a) / (s.norm() * a.norm()));
    ++states;
  }
  const bool ok = states == kInteriorStates && worst >= kMinCosine;
  return {ok, fmt::format("{} interior states of {} (beta {}): min cosine {:.5f} (need >= {})", states,
                          sc.name, sc.filter.slack_beta, worst, kMinCosine)};
}

Outcome criterion8() {
  OrientedBBox truth;
  truth.center = Vector3(0.6, -0.1, 0.25);
  truth.rotation = rotation_from_rpy(0.3, -0.2, 0.7);
  truth.extents = Vector3(0.24, 0.16, 0.1);
  const Vector3 eyes[] = {truth.center + Vector3(1.2, -0.9, 0.8), truth.center + Vector3(-1.0, 1.1, -0.7)};
  std::vector<std::vector<Vector3>> clouds;
  double worst_px = 0.0, worst_z = 0.0;
  long pixels = 0;
  for (const Vector3& eye : eyes) {
    const CameraModel cam{600.0, 600.0, 319.5, 239.5, look_at(eye, truth.center)};
    const LabeledView view = render_boxes(cam, 640, 480, {truth});
    const MaskedDepth md = view.mask_for(1);
    const auto pts = lift_mask(cam, md);
    // lift_mask walks the raster row by row, so the i-th point belongs to
    // the i-th valid pixel.
    std::size_t i = 0;
    for (int v = 0; v < md.height; ++v) {
      for (int u = 0; u < md.width; ++u) {
        const auto idx = static_cast<std::size_t>(v) * md.width + u;
        if (!md.mask[idx] || md.depth[idx] <= 0.0) continue;
        if (i >= pts.size()) return {false, "lifted point count mismatch"};
        const auto back = project_point(cam, pts[i++]);
        if (!back) return {false, "lifted point projects behind the camera"};
        worst_px = std::max(worst_px, std::hypot(back->u - u, back->v - v));
        worst_z = std::max(worst_z, std::abs(back->z - md.depth[idx]));
        ++pixels;
      }
    }
    clouds.push_back(pts);
  }
  const OrientedBBox fit = fit_obb(merge_views(clouds));
  std::vector<double> got(fit.extents.data(), fit.extents.data() + 3);
  std::vector<double> want(truth.extents.data(), truth.extents.data() + 3);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  double worst_e = 0.0;
  for (int k = 0; k < 3; ++k) worst_e = std::max(worst_e, std::abs(got[k] - want[k]));
  const bool ok = worst_e <= kExtentTol && worst_px <= kPixelTol;
  return {ok, fmt::format("extents {:.9f} {:.9f} {:.9f}, worst error {:.2e} m (tol {:g}); {} pixels "
                          "round trip worst {:.2e} px (tol {}), depth {:.1e} m",
                          got[0], got[1], got[2], worst_e, kExtentTol, pixels, worst_px, kPixelTol, worst_z)};
}

Outcome criterion9() {
  const fs::path first = work_dir() / "c1";
  if (!fs::exists(first / cli::metrics_file_name(true))) return {false, "criterion 1 did not run"};
  // Same seeds, a different worker count.
  const int rc = sweep(kAirHockey, kSafetyEpisodes, work_dir() / "c9", jobs() == 1 ? 2 : 1);
  if (rc != 0) return {false, fmt::format("run exited with {}", rc)};
  bool same = true;
  for (bool filtered : {true, false}) {
    const auto name = cli::metrics_file_name(filtered);
    same = same && oracle::slurp(first / name) == oracle::slurp(work_dir() / "c9" / name) &&
           !oracle::slurp(first / name).empty();
  }
  return {same, same ? "metrics files bitwise identical across repeated runs"
                     : "metrics files differ between repeated runs"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3,
                                                          criterion4, criterion5, criterion6,
                                                          criterion7, criterion8, criterion9};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.passed ? 0 : 1;
    std::cout << fmt::format("criterion {}: {}  {}", i + 1, o.passed ? "PASS" : "FAIL", o.detail)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size())
            << std::endl;
  return failed == 0 ? 0 : 1;
}
