#include <benchmark/benchmark.h>

#include "strokeppg/ingest.hpp"
#include "strokeppg/kinematics.hpp"
#include "strokeppg/resnet1d.hpp"
#include "strokeppg/synthppg.hpp"

namespace {

using namespace strokeppg;

Waveform make_record(double seconds) {
  BeatModel model;
  DriftSpec drift;
  drift.noise_sd_frac = 0.02;
  drift.hr_jitter_sd = 0.03;
  return synth_record(model, seconds, 125.0, drift, std::nullopt, 7).wave;
}

void BM_BandpassFilter(benchmark::State& state) {
  Waveform w = make_record(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    Waveform y = bandpass_filter(w, 0.5, 12.0);
    benchmark::DoNotOptimize(y.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(w.samples.size()));
}
BENCHMARK(BM_BandpassFilter)->Arg(60)->Arg(600);

void BM_BeatDetection(benchmark::State& state) {
  Waveform w = bandpass_filter(make_record(static_cast<double>(state.range(0))), 0.5, 12.0);
  DerivativeStack d = derivatives(w);
  for (auto _ : state) {
    auto beats = detect_beats(d);
    benchmark::DoNotOptimize(beats.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(w.samples.size()));
}
BENCHMARK(BM_BeatDetection)->Arg(60)->Arg(600);

void BM_NetworkForward(benchmark::State& state) {
  ArchSpec arch;
  arch.in_channels = 8;
  Network net(arch);
  auto params = net.init_params(1);
  auto stats = net.init_stats();
  int B = static_cast<int>(state.range(0));
  std::vector<double> input(static_cast<size_t>(B) * arch.in_channels * arch.input_len, 0.1);
  for (auto _ : state) {
    auto logits = net.forward(params, stats, input, B, false);
    benchmark::DoNotOptimize(logits.data());
  }
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_NetworkForward)->Arg(1)->Arg(64);

void BM_NetworkBackward(benchmark::State& state) {
  ArchSpec arch;
  arch.in_channels = 8;
  Network net(arch);
  auto params = net.init_params(1);
  auto stats = net.init_stats();
  int B = static_cast<int>(state.range(0));
  std::vector<double> input(static_cast<size_t>(B) * arch.in_channels * arch.input_len, 0.1);
  std::vector<int> labels(B);
  for (int i = 0; i < B; ++i) labels[i] = i % 2;
  std::vector<double> grad(net.param_count());
  for (auto _ : state) {
    double loss = net.loss_and_grad(params, stats, input, labels, B, 3.0, &grad);
    benchmark::DoNotOptimize(loss);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_NetworkBackward)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
