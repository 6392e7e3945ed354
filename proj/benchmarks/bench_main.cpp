#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "metadkit/binning.hpp"
#include "metadkit/nonparam.hpp"
#include "metadkit/resample.hpp"
#include "metadkit/sdt.hpp"
#include "metadkit/synth.hpp"

namespace {

using namespace metadkit;

SynthConfig sample_config(std::size_t n) {
  SynthConfig c;
  c.n_trials = n;
  c.p_correct = 0.7;
  c.mu_correct = -0.5;
  c.mu_incorrect = -1.5;
  c.domain = "Science";
  return c;
}

struct Columns {
  std::vector<double> nlp;
  std::unique_ptr<bool[]> flags;
  std::size_t n = 0;

  explicit Columns(const TrialSet& set) : flags(new bool[set.size()]), n(set.size()) {
    std::size_t i = 0;
    for (const auto& r : set) {
      nlp.push_back(r.nlp);
      flags[i++] = r.correct;
    }
  }
  std::span<const bool> correct() const { return {flags.get(), n}; }
};

void BM_MetaDFit(benchmark::State& state) {
  const Columns cols(generate(sample_config(2000)));
  const RatingScale scale{4};
  const auto bins = quantile_bins(cols.nlp, scale);
  const auto table = pad_counts(build_counts(bins, cols.correct(), scale));
  const auto t1 = type1_fit(table);
  for (auto _ : state) benchmark::DoNotOptimize(meta_d_fit(table, t1));
}
BENCHMARK(BM_MetaDFit);

void BM_QuantileBins(benchmark::State& state) {
  const Columns cols(generate(sample_config(static_cast<std::size_t>(state.range(0)))));
  const RatingScale scale{4};
  for (auto _ : state) benchmark::DoNotOptimize(quantile_bins(cols.nlp, scale));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_QuantileBins)->RangeMultiplier(10)->Range(100, 100000)->Complexity();

void BM_Auroc2(benchmark::State& state) {
  const Columns cols(generate(sample_config(static_cast<std::size_t>(state.range(0)))));
  for (auto _ : state) benchmark::DoNotOptimize(auroc2(cols.nlp, cols.correct()));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc2)->RangeMultiplier(10)->Range(100, 100000)->Complexity();

void BM_BootstrapMetaD(benchmark::State& state) {
  const auto trials = generate(sample_config(300));
  BootstrapOptions options;
  options.n_resamples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_metric(trials, Metric::MetaD, options));
}
BENCHMARK(BM_BootstrapMetaD)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
