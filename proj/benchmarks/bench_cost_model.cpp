#include <benchmark/benchmark.h>

#include "scalebench/cost_model.hpp"

using namespace scalebench;

namespace {

const ModelSpec kGen{"gen", ModelRole::Generator, 1'500'000'000ULL};
const ModelSpec kVer{"rm", ModelRole::Verifier, 72'000'000'000ULL};
const CostParams kCost{921, 128};

void BM_OrmFlops(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(orm_flops(kGen, kVer, 8, kCost));
    }
}
BENCHMARK(BM_OrmFlops);

void BM_MatchBudget(benchmark::State& state) {
    const auto k = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(match_budget(kGen, kVer, k, kCost, 0.15));
    }
}
BENCHMARK(BM_MatchBudget)->Arg(2)->Arg(8)->Arg(32);

} // namespace
