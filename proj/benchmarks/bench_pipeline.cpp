#include "emgkin/data.hpp"
#include "emgkin/model.hpp"

#include <benchmark/benchmark.h>

using namespace emgkin;

namespace {

const data::Session& session() {
  static const data::Session s = [] {
    data::SynthConfig c;
    c.duration_s = 60.0;
    c.seed = 3;
    return data::generate_synthetic(c);
  }();
  return s;
}

// The most recent context of the session, as the online path sees it.
EmgRecording context(const FeatureConfig& f) {
  const auto& rec = session().emg;
  const auto n = static_cast<Eigen::Index>(std::llround(f.cmts.context_ms() * rec.fs / 1000.0));
  EmgRecording out = rec;
  out.data = rec.data.rightCols(n);
  return out;
}

FeatureTransform fitted_transform(ModelKind kind) {
  const FeatureConfig f = ModelSpec::defaults(kind).features;
  const std::vector<PreparedSession> p{prepare_session(session(), f)};
  return FeatureTransform::fit(f, p, all_samples(p), true);
}

void features(benchmark::State& state, ModelKind kind) {
  const FeatureTransform t = fitted_transform(kind);
  const auto filters = t.filters(session().emg.fs);
  const EmgRecording ctx = context(t.config());
  for (auto _ : state) benchmark::DoNotOptimize(t.context_features(ctx, filters));
}

void trr_inference(benchmark::State& state) {
  ModelSpec spec = ModelSpec::defaults(ModelKind::kTrr);
  spec.train.max_epochs = 1;
  const std::vector<PreparedSession> p{prepare_session(session(), spec.features)};
  const auto all = all_samples(p);
  const std::vector<SampleRef> train(all.begin(), all.end() - 50), val(all.end() - 50, all.end());
  TrainedModel m(spec);
  m.fit(p, train, val);
  const auto filters = m.transform().filters(session().emg.fs);
  const Eigen::MatrixXd x = m.extract_features(context(spec.features), filters);
  for (auto _ : state) benchmark::DoNotOptimize(m.infer(x));
}

}  // namespace

BENCHMARK_CAPTURE(features, cmts_3band, ModelKind::kTrr)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(features, cmts_1band, ModelKind::kTrrSimplified)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(features, tdf, ModelKind::kMlpTdf)->Unit(benchmark::kMicrosecond);
BENCHMARK(trr_inference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
