#include <benchmark/benchmark.h>

#include <random>

#include "scalebench/metrics.hpp"

using namespace scalebench;

namespace {

CorrectnessMatrix random_matrix(std::size_t problems, std::size_t languages,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CorrectnessMatrix m;
    for (std::size_t i = 0; i < problems; ++i) {
        m.problem_ids.push_back("p" + std::to_string(i));
    }
    for (std::size_t j = 0; j < languages; ++j) {
        m.languages.push_back("l" + std::to_string(j));
    }
    m.cells.resize(problems * languages);
    for (auto& cell : m.cells) {
        cell = rng() % 2 ? Cell::Correct : Cell::Incorrect;
    }
    return m;
}

void BM_FleissKappa(benchmark::State& state) {
    const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 55, 99);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fleiss_kappa(m));
    }
}
BENCHMARK(BM_FleissKappa)->Arg(100)->Arg(1000);

void BM_Polyfit(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<std::pair<double, double>> points;
    for (int i = 0; i < state.range(0); ++i) {
        const double x = u(rng) * 10;
        points.push_back({x, 1 + x + 0.1 * x * x + u(rng)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(polyfit(points, 3));
    }
}
BENCHMARK(BM_Polyfit)->Arg(32)->Arg(512);

} // namespace
