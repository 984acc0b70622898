#include "ctfminer/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ctfminer::kernels;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
    return state.range(1) ? ExecPolicy::Parallel : ExecPolicy::Serial;
}

void BM_AccumulateWindowScores(benchmark::State& state) {
    const auto trainees = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::uniform_int_distribution<int> lvl(0, 5);
    WindowGeometry geo{{0.0, 0.4, 0.8}, {0.5, 0.9, 1.0}};
    std::vector<std::vector<PositionedEvent>> per(trainees);
    for (auto& row : per) {
        for (int i = 0; i < 400; ++i) row.push_back({static_cast<std::size_t>(lvl(rng)), pos(rng), -1.0});
    }
    for (auto _ : state) benchmark::DoNotOptimize(accumulate_window_scores(per, geo, 6, policy_of(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(trainees) * 400);
}

void BM_NormalizeWindows(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> score(-40, 30);
    Matrix raw(rows, 60);
    for (auto& x : raw.data) x = score(rng);
    std::vector<unsigned char> mask(raw.data.size(), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(normalize_windows(raw, mask, Normalization::SymmetricMedian, policy_of(state)));
    }
}

void BM_AssignNearest(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t dims = 18, k = 8;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    std::vector<double> pts(n * dims), cents(k * dims);
    for (auto& x : pts) x = coord(rng);
    for (auto& x : cents) x = coord(rng);
    std::vector<int> assign(n);
    std::vector<double> dist(n);
    for (auto _ : state) {
        assign_nearest(pts, cents, dims, assign, dist, policy_of(state));
        benchmark::DoNotOptimize(dist.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}

}  // namespace

BENCHMARK(BM_AccumulateWindowScores)->ArgsProduct({{64, 1024, 8192}, {0, 1}})->ArgNames({"trainees", "parallel"});
BENCHMARK(BM_NormalizeWindows)->ArgsProduct({{64, 1024, 8192}, {0, 1}})->ArgNames({"rows", "parallel"});
BENCHMARK(BM_AssignNearest)->ArgsProduct({{1024, 65536}, {0, 1}})->ArgNames({"points", "parallel"});

BENCHMARK_MAIN();
