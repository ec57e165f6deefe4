#include "safelayer/diagnostics.hpp"

#include <map>
#include <mutex>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "logging.hpp"

namespace safelayer {

namespace detail {

void warn_throttled(std::string_view key, std::string_view message) {
  static std::mutex mutex;
  static std::map<std::string, long, std::less<>> counts;
  long n = 0;
  {
    const std::lock_guard lock(mutex);
    auto it = counts.find(key);
    if (it == counts.end()) it = counts.emplace(std::string(key), 0).first;
    n = ++it->second;
  }
  // First three occurrences, then every thousandth.
  if (n <= 3) {
    spdlog::warn("{}", message);
  } else if (n % 1000 == 0) {
    spdlog::warn("{} (repeated {} times)", message, n);
  }
}

}  // namespace detail

double jacobian_fd_error(const ConstraintBlock& block, const Vector& q, double h) {
  const ConstraintEvaluation at = block.evaluate(q);
  Matrix fd(block.rows(), q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Vector qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    fd.col(i) = (block.evaluate(qp).g - block.evaluate(qm).g) / (2.0 * h);
  }
  return (at.jacobian - fd).norm() / std::max(fd.norm(), 1e-6);
}

std::vector<CheckResult> check_jacobians(const ConstraintSet& constraints, const Vector& q,
                                         double tolerance) {
  std::vector<CheckResult> out;
  for (const auto& block : constraints.blocks()) {
    const double err = jacobian_fd_error(block, q);
    out.push_back({"jacobian:" + block.label(), err <= tolerance,
                   fmt::format("relative error {:.3e} (limit {:.0e})", err, tolerance)});
  }
  return out;
}

std::vector<CheckResult> validate_scenario(const Scenario& sc) {
  std::vector<CheckResult> out;
  const auto run = [&](const char* name, auto&& fn) {
    try {
      out.push_back({name, true, fn()});
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  run("rates", [&] {
    const int n = sc.substeps();
    return fmt::format("{} Hz policy, {} Hz filter, {} substeps per action", sc.policy_rate_hz,
                       sc.filter_rate_hz, n);
  });
  run("chain", [&] {
    if (sc.chain.dof() < 1) throw DomainError("chain has no joints");
    for (const auto& p : sc.points) sc.chain.check_attachment(p.attachment);
    for (const auto& s : sc.cover.spheres) sc.chain.check_attachment(s.attachment);
    return fmt::format("{} joints, {} named points, {} spheres", sc.chain.dof(), sc.points.size(),
                       sc.cover.size());
  });
  run("initial_state", [&] {
    sc.chain.check_configuration(sc.initial_q);
    const Vector lo = sc.chain.lower_limits(), hi = sc.chain.upper_limits();
    if ((sc.initial_q.array() <= lo.array()).any() || (sc.initial_q.array() >= hi.array()).any()) {
      throw DomainError("initial configuration is not strictly inside the joint limits");
    }
    return std::string("inside joint limits");
  });
  run("filter", [&] {
    sc.filter.validate();
    if (std::abs(sc.filter.substep_dt * sc.filter_rate_hz - 1.0) > 1e-12) {
      throw DomainError("substep_dt does not match the filter rate");
    }
    return fmt::format("beta {}, tolerance {}, error gain {} 1/s", sc.filter.slack_beta,
                       sc.filter.slack_tolerance, sc.filter.error_gain);
  });
  run("scenario", [&] {
    sc.validate();
    return std::string("complete");
  });
  try {
    const ConstraintSet set = sc.build_constraints();
    const ConstraintEvaluation ev = set.evaluate(sc.initial_q);
    const double max_g = ev.g.size() ? ev.g.maxCoeff() : -1.0;
    out.push_back({"initial_constraints", max_g <= sc.filter.slack_tolerance,
                   fmt::format("{} rows, max g {:.4g}", set.rows(), max_g)});
    const auto jac = check_jacobians(set, sc.initial_q);
    out.insert(out.end(), jac.begin(), jac.end());
  } catch (const std::exception& e) {
    out.push_back({"constraints", false, e.what()});
  }
  return out;
}

std::vector<CheckResult> validate_scenario_file(const std::filesystem::path& path) {
  try {
    const Scenario sc = load_scenario(path);
    std::vector<CheckResult> out{{"load", true, path.string()}};
    const auto rest = validate_scenario(sc);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  } catch (const std::exception& e) {
    return {{"load", false, e.what()}};
  }
}

}  // namespace safelayer
