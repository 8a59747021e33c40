#include <benchmark/benchmark.h>

#include <random>

#include "fluxgfm/scenarios.hpp"
#include "fluxgfm/smallsignal.hpp"

using namespace fluxgfm;

namespace {

SmallMatrix random_matrix(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SmallMatrix a(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = u(rng);
    return a;
}

void BM_eig_small_7x7(benchmark::State& state) {
    const SmallMatrix a = random_matrix(7, 42);
    for (auto _ : state) benchmark::DoNotOptimize(eig_small(a));
}
BENCHMARK(BM_eig_small_7x7);

void BM_full_design(benchmark::State& state) {
    const TuningSpec spec = reference_design();
    for (auto _ : state) benchmark::DoNotOptimize(full_design(spec));
}
BENCHMARK(BM_full_design);

void BM_find_equilibrium_mismatched(benchmark::State& state) {
    const Design d = full_design(reference_design());
    PlantParams plant;
    plant.L_pu = 0.1;
    PlantParams nominal = plant;
    nominal.L_pu = 0.5;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            find_equilibrium(d.gains, d.setpoints, plant, nominal, d.gains.omega0));
}
BENCHMARK(BM_find_equilibrium_mismatched);

void BM_closed_loop_matrix(benchmark::State& state) {
    const Design d = full_design(reference_design());
    PlantParams plant;
    plant.L_pu = 0.7;
    PlantParams nominal = plant;
    nominal.L_pu = 0.5;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            closed_loop_matrix(d.gains, d.setpoints, plant, nominal, d.gains.omega0));
}
BENCHMARK(BM_closed_loop_matrix);

void BM_simulate_100ms(benchmark::State& state) {
    Scenario sc = standard_scenario("step_L050");
    sc.duration = 0.1;
    sc.events = {PowerStep{0.05, 0.5}};
    for (auto _ : state) benchmark::DoNotOptimize(simulate(sc));
}
BENCHMARK(BM_simulate_100ms)->Unit(benchmark::kMillisecond);

void BM_pole_sweep_10(benchmark::State& state) {
    const Design d = full_design(reference_design());
    PlantParams plant;
    PlantParams nominal = plant;
    std::vector<double> Ls;
    for (int k = 1; k <= 10; ++k) Ls.push_back(0.1 * k);
    for (auto _ : state)
        benchmark::DoNotOptimize(pole_sweep(d.gains, d.setpoints, plant, nominal, Ls));
}
BENCHMARK(BM_pole_sweep_10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
