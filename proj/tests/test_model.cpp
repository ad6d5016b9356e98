#include "emgkin/config.hpp"
#include "emgkin/data.hpp"
#include "emgkin/error.hpp"
#include "emgkin/model.hpp"
#include "emgkin/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace emgkin;
namespace fs = std::filesystem;

namespace {

data::Session synth(double duration, std::uint64_t seed) {
  data::SynthConfig c;
  c.duration_s = duration;
  c.seed = seed;
  return data::generate_synthetic(c);
}

// Small, fast network so model tests stay cheap.
ModelSpec small_trr() {
  ModelSpec s = ModelSpec::defaults(ModelKind::kTrr);
  s.trr = {16, 12, 8, 8, 0.1};
  s.train.max_epochs = 3;
  s.train.batch_size = 64;
  s.train.learning_rate = 1e-3;
  return s;
}

TrainedModel fit_on(const data::Session& s, const ModelSpec& spec) {
  TrainedModel m(spec);
  const std::vector<PreparedSession> p{prepare_session(s, spec.features)};
  const auto all = all_samples(p);
  const auto cut = static_cast<long>(all.size() * 9 / 10);
  const std::vector<SampleRef> train(all.begin(), all.begin() + cut), val(all.begin() + cut, all.end());
  m.fit(p, train, val);
  return m;
}

}  // namespace

TEST_CASE("sample count and target alignment follow the window grid") {
  const riemann::CmtsConfig cfg;  // 300 ms windows, 100 ms step, 10 windows
  CHECK(sample_count(599, 500.0, cfg) == 0);
  CHECK(sample_count(600, 500.0, cfg) == 1);
  CHECK(sample_count(650, 500.0, cfg) == 2);
  CHECK(sample_count(10000, 500.0, cfg) == (10000 - 150) / 50 + 1 - 9);

  const data::Session s = synth(10.0, 1);
  const PreparedSession p = prepare_session(s, FeatureConfig{});
  CHECK(p.n_samples() == sample_count(5000, 500.0, cfg));
  CHECK(p.n_windows() == (5000 - 150) / 50 + 1);
  CHECK(p.covariances.size() == 3);
  CHECK(p.context(0).begin == 0);
  CHECK(p.context(0).end == 600);
  CHECK(p.target_index(0) == 599);
  CHECK(p.target_index(3) == 599 + 150);
  for (std::size_t i : {0u, 5u, 40u}) {
    CHECK(p.targets.row(static_cast<Eigen::Index>(i)) == s.kin.angles.col(p.target_index(i)).transpose());
  }
}

TEST_CASE("feature transform: one tangent block per band and standardised training features") {
  const data::Session s = synth(20.0, 2);
  const FeatureConfig cfg;
  const std::vector<PreparedSession> p{prepare_session(s, cfg)};
  const auto refs = all_samples(p);
  const FeatureTransform t = FeatureTransform::fit(cfg, p, refs, true);
  CHECK(t.window_dim() == 3 * 36);
  CHECK(t.reference_converged());
  const Eigen::MatrixXd f = t.window_features(p[0]);
  CHECK(f.rows() == static_cast<Eigen::Index>(p[0].n_windows()));
  CHECK(f.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);

  // the single-sample path reproduces the batch features of the last sample
  const auto ctx = p[0].context(p[0].n_samples() - 1);
  EmgRecording tail = s.emg;
  tail.data = s.emg.data.leftCols(static_cast<Eigen::Index>(ctx.end));
  const Eigen::MatrixXd seq = t.context_features(tail, t.filters(s.emg.fs));
  CHECK(seq.rows() == 10);
  // filtering a short context differs at the edges from filtering the whole session
  CHECK(seq.allFinite());

  FeatureConfig tdf;
  tdf.kind = FeatureKind::kTdf;
  const std::vector<PreparedSession> q{prepare_session(s, tdf)};
  const FeatureTransform u = FeatureTransform::fit(tdf, q, all_samples(q), true);
  CHECK(u.window_dim() == 56);
}

TEST_CASE("model kinds have their documented defaults") {
  CHECK(parse_model_kind("trr-simplified") == ModelKind::kTrrSimplified);
  CHECK(to_string(ModelKind::kMlpTdf) == "mlp-tdf");
  CHECK_THROWS_AS(parse_model_kind("svm"), Error);
  const ModelSpec simple = ModelSpec::defaults(ModelKind::kTrrSimplified);
  REQUIRE(simple.features.cmts.bands.size() == 1);
  CHECK(simple.features.cmts.bands[0] == BandSpec{5.0, 150.0});
  CHECK(ModelSpec::defaults(ModelKind::kMlpTdf).features.kind == FeatureKind::kTdf);
  const ModelSpec trr = ModelSpec::defaults(ModelKind::kTrr);
  CHECK(trr.features.cmts.bands.size() == 3);
  CHECK(trr.train.learning_rate == 2e-4);
  CHECK(trr.train.batch_size == 256);

  const ModelSpec back = ModelSpec::from_json(trr.to_json());
  CHECK(back.to_json() == trr.to_json());
}

TEST_CASE("saved models reload with identical predictions") {
  const data::Session s = synth(20.0, 3);
  const fs::path dir = fs::temp_directory_path() / ("emgkin_model_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  for (const ModelSpec& spec : {small_trr(), ModelSpec::defaults(ModelKind::kRidge)}) {
    TrainedModel m = fit_on(s, spec);
    m.run_config = {{"seed", 7}};
    const fs::path file = dir / (std::string(to_string(spec.kind)) + ".emgk");
    m.save(file);
    const TrainedModel r = TrainedModel::load(file);
    CHECK(r.fitted());
    CHECK(r.run_config == m.run_config);
    CHECK(r.joint_names() == m.joint_names());
    const Eigen::MatrixXd a = m.predict_session(s), b = r.predict_session(s);
    CHECK(a.rows() == static_cast<Eigen::Index>(sample_count(static_cast<std::size_t>(s.emg.n_samples()),
                                                              s.emg.fs, spec.features.cmts)));
    CHECK(a == b);

    // saving the reloaded model yields the same bytes
    const fs::path again = dir / "again.emgk";
    r.save(again);
    std::ifstream x(file, std::ios::binary), y(again, std::ios::binary);
    const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
    CHECK(sx == sy);
  }
  fs::remove_all(dir);
}

TEST_CASE("the TRR artifact records the closed-form parameter count") {
  const data::Session s = synth(10.0, 4);
  ModelSpec spec = small_trr();
  spec.train.max_epochs = 1;
  const TrainedModel m = fit_on(s, spec);
  CHECK(m.network().parameter_count() == neural::trr_parameter_count(108, 15, spec.trr));
  CHECK(m.summary().contains("best_epoch"));
}

TEST_CASE("loading a corrupt artifact fails cleanly") {
  const fs::path file = fs::temp_directory_path() / ("emgkin_bad_" + std::to_string(::getpid()) + ".emgk");
  {
    std::ofstream out(file, std::ios::binary);
    out << "EMGKMDL";
  }
  CHECK_THROWS_AS(TrainedModel::load(file), Error);
  fs::remove(file);
  CHECK_THROWS_AS(TrainedModel::load(file), Error);
}

TEST_CASE("run config: sections, comments, defaults by kind and overrides") {
  const RunConfig c = RunConfig::parse(R"(# experiment
[run]
seed = 42

[model]
kind = trr-simplified

[train]
learning_rate = 0.001   # faster
max_epochs = 12

[features]
bands = 5-40, 40-80
shrinkage = 0.2

[eval]
k = 5
)");
  CHECK(c.seed == 42);
  CHECK(c.model.kind == ModelKind::kTrrSimplified);
  CHECK(c.model.train.learning_rate == 1e-3);
  CHECK(c.model.train.max_epochs == 12);
  REQUIRE(c.model.features.cmts.bands.size() == 2);
  CHECK(c.model.features.cmts.bands[1] == BandSpec{40, 80});
  CHECK(std::get<riemann::FixedShrinkage>(c.model.features.cmts.shrinkage).alpha == 0.2);
  CHECK(c.cv.k == 5);
  CHECK(c.text.find("# experiment") == 0);

  RunConfig d = c;
  d.set("train.patience=3");
  d.set("run.seed = 7");
  CHECK(d.model.train.patience == 3);
  CHECK(d.seed == 7);
  CHECK(d.model.train.max_epochs == 12);  // earlier values survive an override
  CHECK(d.model_seed() != d.cv_seed());
  CHECK(d.cv_seed() != d.synth_seed());
  CHECK(d.model_seed() != c.model_seed());

  const auto j = d.to_json();
  CHECK(j.contains("text"));
  CHECK(j.contains("derived_seeds"));
}

TEST_CASE("run config rejects unknown keys, sections and malformed values") {
  for (const char* bad : {"[model]\nkind = svm\n", "[train]\nlearnin_rate = 1\n", "[nope]\nx = 1\n",
                          "[train]\nbatch_size = -3\n", "[features]\nbands = 5\n", "seed = 1\n",
                          "[eval]\nleakage_guard = maybe\n"}) {
    INFO(bad);
    CHECK_THROWS_AS(RunConfig::parse(bad), Error);
  }
  RunConfig c;
  CHECK_THROWS_AS(c.set("train.nope=1"), Error);
  CHECK_THROWS_AS(c.set("no equals sign"), Error);
}
