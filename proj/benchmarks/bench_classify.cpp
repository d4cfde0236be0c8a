#include <sstream>
#include <string>

#include <benchmark/benchmark.h>

#include "ruleids/log.hpp"
#include "ruleids/pipeline.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace ruleids;

const Model& kdd_model() {
  static const Model model = [] {
    set_log_sink([](LogLevel, std::string_view) {});
    RunConfig config;
    config.format = SourceFormat::kdd;
    TrainResult r = train(testing::kdd_dataset(2000, 5), config);
    return Model{config, r.schema, r.rules};
  }();
  return model;
}

void BM_ClassifyStream(benchmark::State& state) {
  const Model& model = kdd_model();
  testing::KddGenerator gen(6);
  const std::string text = gen.text(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    std::istringstream in(text);
    std::ostringstream out;
    ClassifyStats s = classify_stream(model, in, out);
    benchmark::DoNotOptimize(s.rows);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClassifyStream)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

// Matcher only, on an already binarized matrix.
void BM_RuleMatch(benchmark::State& state) {
  const Model& model = kdd_model();
  const Dataset data = testing::kdd_dataset(static_cast<std::size_t>(state.range(0)), 9);
  const BinaryFeatureMatrix x = binarize(data, model.schema);
  for (auto _ : state) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) hits += classify(model.rules, x, i).rule.has_value();
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RuleMatch)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ExtractRules(benchmark::State& state) {
  set_log_sink([](LogLevel, std::string_view) {});
  RunConfig config;
  config.format = SourceFormat::kdd;
  config.skip_embedding = true;
  config.k = 4;
  const Dataset data = testing::kdd_dataset(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(train(data, config).rules.rules.size());
}
BENCHMARK(BM_ExtractRules)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
