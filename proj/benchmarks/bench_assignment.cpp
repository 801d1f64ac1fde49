#include "iplpmb/assignment.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace iplpmb;

namespace {

CostMatrix random_costs(int n, int m) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  CostMatrix c(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) c(i, j) = u(rng);
  }
  return c;
}

void BM_SolveAssignment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const CostMatrix c = random_costs(n, 2 * n + 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_assignment(c));
  }
}
BENCHMARK(BM_SolveAssignment)->RangeMultiplier(2)->Range(4, 32);

void BM_MurtyKBest(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const CostMatrix c = random_costs(n, 2 * n + 1);
  const int k = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(murty_kbest(c, k));
  }
}
BENCHMARK(BM_MurtyKBest)->Args({8, 10})->Args({16, 10})->Args({8, 50});

}  // namespace
