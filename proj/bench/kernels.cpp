// Serial reference kernels against their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>

#include "dfaforge/clustering.hpp"
#include "dfaforge/extraction.hpp"
#include "dfaforge/rnn.hpp"
#include "dfaforge/tomita.hpp"

using namespace dfaforge;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = unit(rng);
  return v;
}

const DatasetSplit& data() {
  static const DatasetSplit d = generate_dataset(GrammarId(4), 3, 13, 0.2, 1);
  return d;
}

const SecondOrderRnn& model() {
  static const SecondOrderRnn m = SecondOrderRnn::random(15, 0.5, 1);
  return m;
}

template <bool Serial>
void BM_AssignNearest(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto pts = uniform(n * 15, 1);
  const auto cents = uniform(12 * 15, 2);
  std::vector<int> a(n);
  for (auto _ : state) {
    const double inertia = Serial ? assign_nearest_serial({pts, 15}, cents, 12, a)
                                  : assign_nearest({pts, 15}, cents, 12, a);
    benchmark::DoNotOptimize(inertia);
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <bool Serial>
void BM_Silhouette(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto pts = uniform(n * 15, 3);
  const Clustering c = kmeans({pts, 15}, 8, 1, 20);
  for (auto _ : state) {
    const double s = Serial ? silhouette_serial({pts, 15}, c) : silhouette({pts, 15}, c);
    benchmark::DoNotOptimize(s);
  }
}

template <bool Serial>
void BM_RnnAccuracy(benchmark::State& state) {
  for (auto _ : state) {
    const double a = Serial ? accuracy_serial(model(), data().train) : accuracy(model(), data().train);
    benchmark::DoNotOptimize(a);
  }
  state.SetItemsProcessed(state.iterations() * data().train.size());
}

template <bool Serial>
void BM_CollectActivations(benchmark::State& state) {
  for (auto _ : state) {
    auto t = Serial ? collect_activations_serial(model(), data().test)
                    : collect_activations(model(), data().test);
    benchmark::DoNotOptimize(t.states.data());
  }
  state.SetItemsProcessed(state.iterations() * data().test.size());
}

template <bool Serial>
void BM_DfaAccuracy(benchmark::State& state) {
  const Dfa d = ground_truth(GrammarId(4));
  for (auto _ : state) {
    const double a = Serial ? dfa_accuracy_serial(d, data().train) : dfa_accuracy(d, data().train);
    benchmark::DoNotOptimize(a);
  }
  state.SetItemsProcessed(state.iterations() * data().train.size());
}

}  // namespace

BENCHMARK_TEMPLATE(BM_AssignNearest, true)->Name("assign_nearest/serial")->Arg(20000)->Arg(200000);
BENCHMARK_TEMPLATE(BM_AssignNearest, false)->Name("assign_nearest/omp")->Arg(20000)->Arg(200000);
BENCHMARK_TEMPLATE(BM_Silhouette, true)->Name("silhouette/serial")->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Silhouette, false)->Name("silhouette/omp")->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_RnnAccuracy, true)->Name("rnn_accuracy/serial")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_RnnAccuracy, false)->Name("rnn_accuracy/omp")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_CollectActivations, true)->Name("collect_activations/serial")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_CollectActivations, false)->Name("collect_activations/omp")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_DfaAccuracy, true)->Name("dfa_accuracy/serial")->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_DfaAccuracy, false)->Name("dfa_accuracy/omp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
