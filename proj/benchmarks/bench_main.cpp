#include "cvar_reach/envelope.hpp"
#include "cvar_reach/monte_carlo.hpp"
#include "cvar_reach/risk.hpp"
#include "cvar_reach/value_iteration.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace cvar_reach;

namespace {

std::shared_ptr<const AugmentedGrid> pond_grid() {
    return std::make_shared<const AugmentedGrid>(AugmentedGrid::pond_default());
}

} // namespace

static void BM_InnerProblem(benchmark::State& state) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = pond_grid();
    const auto next = terminal_values(grid, StageCostSpec{}, 48);
    std::vector<Successor> succ;
    for (std::size_t j = 0; j < pond.disturbance().size(); ++j)
        succ.push_back({pond.step(4.0, 1.0, pond.disturbance().values()[j]), pond.disturbance().probs()[j]});
    const InnerProblem p = build_inner_problem(succ, 0.2, next);
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_inner(p).optimal_value);
}
BENCHMARK(BM_InnerProblem);

static void BM_InnerProblemLp(benchmark::State& state) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = pond_grid();
    const auto next = terminal_values(grid, StageCostSpec{}, 48);
    std::vector<Successor> succ;
    for (std::size_t j = 0; j < pond.disturbance().size(); ++j)
        succ.push_back({pond.step(4.0, 1.0, pond.disturbance().values()[j]), pond.disturbance().probs()[j]});
    const InnerProblem p = build_inner_problem(succ, 0.2, next);
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_inner_lp(p).optimal_value);
}
BENCHMARK(BM_InnerProblemLp);

static void BM_BellmanBackup(benchmark::State& state) {
    const SystemModel pond = load_pond_benchmark();
    const StageCostSpec spec;
    const auto next = terminal_values(pond_grid(), spec, 48);
    BackupOptions bo;
    bo.threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(bellman_backup(pond, spec, next, 47, bo).values.values().data());
}
BENCHMARK(BM_BellmanBackup)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

static void BM_ValueIteration(benchmark::State& state) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = pond_grid();
    for (auto _ : state)
        benchmark::DoNotOptimize(run_value_iteration(pond, grid, StageCostSpec{}, 48).J0().values().data());
}
BENCHMARK(BM_ValueIteration)->Unit(benchmark::kMillisecond);

static void BM_PondRollouts(benchmark::State& state) {
    const SystemModel pond = load_pond_benchmark();
    McRunConfig cfg;
    cfg.samples = static_cast<std::size_t>(state.range(0));
    const auto g = SurfaceFunction::linear_offset(5.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(sample_costs(pond, RolloutPolicy::fixed_control(1.0), g, nullptr, 0.0, 1.0, cfg, 0).exits);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PondRollouts)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_BootstrapStandardError(benchmark::State& state) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n;
    std::vector<double> s(static_cast<std::size_t>(state.range(0)));
    for (double& v : s)
        v = n(gen);
    const JitteredCvarSample sample(s, 1e-12, 1, 0, 0);
    const auto levels = AugmentedGrid::pond_confidence_levels();
    for (auto _ : state)
        benchmark::DoNotOptimize(sample.bootstrap_standard_errors(levels, 200, 1, 0).front());
}
BENCHMARK(BM_BootstrapStandardError)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
