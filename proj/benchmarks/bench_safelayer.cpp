#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "safelayer/atacom.hpp"
#include "safelayer/constraints.hpp"
#include "safelayer/geometry.hpp"
#include "safelayer/scenario.hpp"

using namespace safelayer;

namespace {

const std::filesystem::path kConfigs = SAFELAYER_CONFIG_DIR;

void filter_step(benchmark::State& state, const char* config) {
  const Scenario sc = load_scenario(kConfigs / config);
  const ConstraintSet set = sc.build_constraints();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.3);
  Vector a(sc.chain.dof());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = n(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(filter_action(sc.initial_q, a, set, sc.filter).a_safe);
  }
}

void BM_FilterActionManipulation(benchmark::State& state) { filter_step(state, "manipulation_planar.yaml"); }
void BM_FilterActionAirHockey(benchmark::State& state) { filter_step(state, "airhockey_iiwa.yaml"); }

void BM_ObbDistance(benchmark::State& state) {
  OrientedBBox box;
  box.center = Vector3(0.6, 0.0, 0.2);
  box.rotation = rotation_from_rpy(0.1, 0.2, 0.3);
  box.extents = Vector3(0.2, 0.3, 0.4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector3> pts(1024);
  for (auto& p : pts) {
    do p = box.center + Vector3(u(rng), u(rng), u(rng));
    while ((p - box.center).norm() < 0.3);  // stay clear of the degenerate center
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(obb_distance(pts[i++ & 1023], 0.05, box).distance);
  }
}

void BM_FitObb(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  const Eigen::Matrix3d r = rotation_from_rpy(0.3, -0.2, 0.7);
  std::vector<Vector3> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = r * Vector3(u(rng), 0.6 * u(rng), 0.4 * u(rng));
  for (auto _ : state) benchmark::DoNotOptimize(fit_obb(pts).extents);
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_FilterActionManipulation);
BENCHMARK(BM_FilterActionAirHockey);
BENCHMARK(BM_ObbDistance);
BENCHMARK(BM_FitObb)->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK_MAIN();
