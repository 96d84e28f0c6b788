#include <benchmark/benchmark.h>

#include <cmath>

#include "catapult/analysis.hpp"
#include "catapult/bounds.hpp"
#include "catapult/datasets.hpp"
#include "catapult/training.hpp"

using namespace catapult;

namespace {

QuadraticModel pure_model(Eigen::Index n, const Dataset& data) {
  MetaFeatureSpec spec;
  spec.n_psi = n;
  spec.d = data.dim();
  spec.seed = 1;
  Rng rng(2);
  return make_quadratic_model(QuadraticFeatureMap(spec), data, 1.0 / std::sqrt(static_cast<double>(n)), rng);
}

void BM_PowerIterationOmega(benchmark::State& state) {
  const Eigen::Index n = state.range(0), d_count = state.range(1);
  const Dataset data = make_random(2, d_count, 0.5, 3);
  const QuadraticModel m = pure_model(n, data);
  const LinearOperator op = omega_operator(m);
  for (auto _ : state) {
    Rng rng(0x0c0ffee);
    benchmark::DoNotOptimize(power_iteration_lambda_max(op, rng, {1e-10, 100000}).value);
  }
  state.counters["nD"] = static_cast<double>(n * d_count);
}
BENCHMARK(BM_PowerIterationOmega)->Args({64, 8})->Args({256, 2})->Args({128, 16})->Unit(benchmark::kMillisecond);

void BM_SymEigen(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  Rng rng(4);
  const Matrix a = rng.normal_matrix(n, n);
  const SymmetricMatrix s = SymmetricMatrix::symmetrized(a + a.transpose());
  for (auto _ : state) benchmark::DoNotOptimize(sym_eigen(s).values(0));
}
BENCHMARK(BM_SymEigen)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ExpmAntisymmetric(benchmark::State& state) {
  Rng rng(5);
  const Matrix b = random_antisymmetric(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expm_antisymmetric(b).data());
}
BENCHMARK(BM_ExpmAntisymmetric)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_QuadraticGdStep(benchmark::State& state) {
  const Dataset toy = make_toy();
  QuadraticModel m = pure_model(state.range(0), toy);
  const double eta = 0.5 / ntk_lambda_max(m, toy);
  for (auto _ : state) benchmark::DoNotOptimize(gd_step(m, toy, eta));
}
BENCHMARK(BM_QuadraticGdStep)->Arg(200)->Arg(1000);

void BM_HomogenousTrainToy(benchmark::State& state) {
  const Dataset toy = make_toy();
  Rng rng(6);
  const HomogenousNet proto =
      HomogenousNet::initialize(state.range(0), 1, Activation::scale_invariant(0.5, 1.0), rng);
  TrainConfig c;
  c.eta = 3.0 / ntk_lambda_max(proto, toy);
  for (auto _ : state) {
    HomogenousNet net = proto;
    benchmark::DoNotOptimize(train(net, toy, c).steps_taken);
  }
}
BENCHMARK(BM_HomogenousTrainToy)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_DeepReluNtk(benchmark::State& state) {
  const Dataset data = make_random(state.range(1), state.range(2), 0.5, 7);
  Rng rng(8);
  const DeepReluNet net = DeepReluNet::initialize(state.range(0), data.dim(), 0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ntk_lambda_max(net, data));
}
BENCHMARK(BM_DeepReluNtk)->Args({1024, 784, 128})->Unit(benchmark::kMillisecond);

void BM_DeepReluGdStep(benchmark::State& state) {
  const Dataset data = make_random(state.range(1), state.range(2), 0.5, 7);
  Rng rng(8);
  DeepReluNet net = DeepReluNet::initialize(state.range(0), data.dim(), 0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gd_step(net, data, 1e-3));
}
BENCHMARK(BM_DeepReluGdStep)->Args({1024, 784, 128})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
