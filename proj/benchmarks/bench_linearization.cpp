#include "iplpmb/geometry.hpp"
#include "iplpmb/linearization.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace iplpmb;

namespace {

// UE plus `n` VA landmarks, all seen in one scan.
struct Stacked {
  GeometryModel model{Eigen::Vector3d(0.0, 0.0, 40.0)};
  ModelFunction fn;
  GaussianDensity prior;
  Vector z;
  Matrix r;

  explicit Stacked(int n) {
    std::vector<LandmarkKind> kinds(static_cast<std::size_t>(n), LandmarkKind::VA);
    fn = stacked_measurement_fn(model, kinds);
    const Eigen::Index d = stacked_state_dim(kinds);
    Vector m(d);
    m.head(5) << 70.0, 5.0, 0.0, 1.6, 300.0;
    Vector var = Vector::Constant(d, 1.0);
    var.head(5) << 0.09, 0.09, 1e-6, 2.7e-5, 0.09;
    for (int i = 0; i < n; ++i) m.segment(5 + 3 * i, 3) << 200.0 - 60.0 * i, 30.0 * i, 40.0;
    prior = GaussianDensity(m, var.asDiagonal());
    z = fn(m);
    r = Matrix::Identity(z.size(), z.size()) * 1e-4;
    r(0, 0) = 0.01;
  }
};

void BM_Slr(benchmark::State& state) {
  const Stacked s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(slr(s.fn, s.prior));
  }
}
BENCHMARK(BM_Slr)->Arg(1)->Arg(2)->Arg(4);

void BM_EkfLinearize(benchmark::State& state) {
  const Stacked s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ekf_linearize(s.fn, s.prior));
  }
}
BENCHMARK(BM_EkfLinearize)->Arg(1)->Arg(2)->Arg(4);

void BM_Iplf(benchmark::State& state) {
  const Stacked s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(iplf(s.fn, s.prior, s.z, s.r));
  }
}
BENCHMARK(BM_Iplf)->Arg(1)->Arg(2)->Arg(4);

}  // namespace
