// Parallel kernels against their serial references, and the modal against
// the dense simulation route.

#include <random>

#include <benchmark/benchmark.h>

#include "hmor/dc_map.hpp"
#include "hmor/fom_bench.hpp"
#include "hmor/lti_sim.hpp"
#include "hmor/stimulus.hpp"

using namespace hmor;

namespace {

const DcTable& bench_table() {
  static const DcTable t = [] {
    FomSpec spec;
    const GridAxes axes = GridAxes::uniform(0.0, 5.0, 41);
    return build_table(fom_dc_sweep_serial(spec, axes), axes);
  }();
  return t;
}

struct Probe {
  std::vector<double> v1, v2, v3;
};

const Probe& probe() {
  static const Probe p = [] {
    Probe q;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int k = 0; k < 200000; ++k) {
      q.v1.push_back(u(rng));
      q.v2.push_back(u(rng));
      q.v3.push_back(u(rng));
    }
    return q;
  }();
  return p;
}

void BM_PhiBatchParallel(benchmark::State& st) {
  const auto& p = probe();
  for (auto _ : st) {
    benchmark::DoNotOptimize(eval_phi_batch(bench_table(), p.v1, p.v2, p.v3, BoxMode::strict));
  }
}
BENCHMARK(BM_PhiBatchParallel)->Unit(benchmark::kMillisecond);

void BM_PhiBatchSerial(benchmark::State& st) {
  const auto& p = probe();
  for (auto _ : st) {
    benchmark::DoNotOptimize(eval_phi_batch_serial(bench_table(), p.v1, p.v2, p.v3, BoxMode::strict));
  }
}
BENCHMARK(BM_PhiBatchSerial)->Unit(benchmark::kMillisecond);

void BM_DcSweepParallel(benchmark::State& st) {
  FomSpec spec;
  const GridAxes axes = GridAxes::uniform(0.0, 5.0, 64);
  for (auto _ : st) benchmark::DoNotOptimize(fom_dc_sweep(spec, axes));
}
BENCHMARK(BM_DcSweepParallel)->Unit(benchmark::kMillisecond);

void BM_DcSweepSerial(benchmark::State& st) {
  FomSpec spec;
  const GridAxes axes = GridAxes::uniform(0.0, 5.0, 64);
  for (auto _ : st) benchmark::DoNotOptimize(fom_dc_sweep_serial(spec, axes));
}
BENCHMARK(BM_DcSweepSerial)->Unit(benchmark::kMillisecond);

LtiData chirp_data(std::size_t spp) {
  ChirpSpec cs;
  cs.f0 = 8e3;
  cs.f1 = 400e6;
  cs.amplitude = 20e-3;
  cs.samples_per_period = spp;
  const TimeSeries src = gen_chirp_pair(cs);
  LtiData d;
  d.t = src.time();
  const auto n = static_cast<Eigen::Index>(src.size());
  d.u.resize(6, n);
  d.target.resize(3, n);
  auto v1 = src.channel("v1");
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = (v1[static_cast<std::size_t>(k)] - 2.5) * 1e-2;
    d.u.col(k) << 0.0, 0.0, x, 0.0, 0.0, x * x;
    d.target.col(k) << 0.0, 0.0, 0.5 * x;
  }
  return d;
}

StateSpace random_system(Eigen::Index n) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  StateSpace ss = StateSpace::zeros(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ss.a(i, i) = -2e6 * std::pow(10.0, static_cast<double>(i));
    for (Eigen::Index j = 0; j < 6; ++j) ss.b(i, j) = 1e6 * g(rng);
    for (Eigen::Index j = 0; j < 3; ++j) ss.c(j, i) = g(rng);
  }
  return ss;
}

void BM_GradientModal(benchmark::State& st) {
  const LtiData d = chirp_data(20);
  const StateSpace ss = random_system(st.range(0));
  for (auto _ : st) {
    benchmark::DoNotOptimize(loss_and_gradient(ss, d, {1.0, 1.0, 1.0}, {}, SimRoute::modal));
  }
}
BENCHMARK(BM_GradientModal)->Arg(1)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_GradientDense(benchmark::State& st) {
  const LtiData d = chirp_data(20);
  const StateSpace ss = random_system(st.range(0));
  for (auto _ : st) {
    benchmark::DoNotOptimize(loss_and_gradient(ss, d, {1.0, 1.0, 1.0}, {}, SimRoute::dense));
  }
}
BENCHMARK(BM_GradientDense)->Arg(1)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
