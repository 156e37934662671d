// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include "dsce/dataset.hpp"
#include "dsce/kernels.hpp"
#include "dsce/random.hpp"

using namespace dsce;

namespace {

struct GradientFixture {
  rnn::NetworkModel model;
  rnn::Dataset data;
  std::vector<std::size_t> batch;

  GradientFixture(rnn::CellKind kind, int batch_size) {
    const auto sc = Scenario::make(FrameLayout::ieee80211p_sbs(100), 4, vtv_sdww(), 1000.0);
    const auto corpus = gen_dataset(sc, static_cast<std::size_t>(batch_size), 40.0, 7, kStreamTrainCorpus);
    data = sbs_dataset(corpus, sc.layout);
    model = rnn::init_model(SbsConfig::make(kind, sc.layout, sc.constellation).architecture(), 3);
    for (int i = 0; i < batch_size; ++i) batch.push_back(static_cast<std::size_t>(i));
  }
};

void BM_GradientsSerial(benchmark::State& state) {
  GradientFixture fx(static_cast<rnn::CellKind>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::sse_serial(fx.model, fx.data, fx.batch).loss);
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_GradientsParallel(benchmark::State& state) {
  GradientFixture fx(static_cast<rnn::CellKind>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::sse_parallel(fx.model, fx.data, fx.batch).loss);
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void frame_kernel(benchmark::State& state, rnn::Exec exec) {
  const auto sc = Scenario::make(FrameLayout::ieee80211p_sbs(100), 4, vtv_sdww(), 1000.0);
  const auto basis = sc.basis();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto ber = kernels::map_indexed<double>(
        n,
        [&](std::size_t i) {
          const auto f = simulate_frame(sc, basis, 20.0, 11, i);
          const auto est = dpa_estimate_frame(f.rx, sc.layout, sc.constellation);
          std::size_t err = 0;
          for (std::size_t b = 0; b < est.bits.size(); ++b) err += est.bits[b] != f.tx.tx_bits[b];
          return static_cast<double>(err);
        },
        exec);
    benchmark::DoNotOptimize(ber.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FramesSerial(benchmark::State& state) { frame_kernel(state, rnn::Exec::Serial); }
void BM_FramesParallel(benchmark::State& state) { frame_kernel(state, rnn::Exec::Parallel); }

}  // namespace

BENCHMARK(BM_GradientsSerial)->Args({2, 64})->Args({1, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientsParallel)->Args({2, 64})->Args({1, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FramesSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FramesParallel)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
