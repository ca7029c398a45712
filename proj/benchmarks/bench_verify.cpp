#include <benchmark/benchmark.h>

#include "scalebench/verify.hpp"

using namespace scalebench;

namespace {

void BM_Normalize(benchmark::State& state) {
    const std::string inputs[] = {"\\frac{355}{113}", "3.14159", "12,345,678",
                                  "The answer", "2.5e3"};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(normalize(inputs[i++ % 5]));
    }
}
BENCHMARK(BM_Normalize);

void BM_ExtractAnswer(benchmark::State& state) {
    std::string text;
    for (int line = 0; line < 40; ++line) {
        text += "some reasoning about the structure of the problem\n";
    }
    text += "so the result is \\boxed{\\frac{7}{2}} after all.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_answer(text));
    }
}
BENCHMARK(BM_ExtractAnswer);

void BM_Equivalent(benchmark::State& state) {
    const CanonicalAnswer a = normalize("\\frac{1}{3}");
    const CanonicalAnswer b = normalize("0.3333333");
    for (auto _ : state) {
        benchmark::DoNotOptimize(equivalent(a, b));
    }
}
BENCHMARK(BM_Equivalent);

} // namespace
