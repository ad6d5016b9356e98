#include "emgkin/data.hpp"
#include "emgkin/error.hpp"
#include "emgkin/eval.hpp"
#include "emgkin/model.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace emgkin;
using namespace emgkin::eval;

namespace {

// Looks the answer up: isolates the harness from any learning.
class OracleEstimator : public Estimator {
 public:
  void fit(std::span<const PreparedSession>, std::span<const SampleRef>, std::span<const SampleRef>) override {}
  Eigen::MatrixXd predict(std::span<const PreparedSession> sessions,
                          std::span<const SampleRef> samples) const override {
    return gather_targets(sessions, samples);
  }
};

class OracleBuilder : public ModelBuilder {
 public:
  std::string name() const override { return "oracle"; }
  PreparedSession prepare(const data::Session& s) const override {
    return prepare_session(s, ModelSpec::defaults(ModelKind::kRidge).features);
  }
  std::unique_ptr<Estimator> create(std::uint64_t) const override { return std::make_unique<OracleEstimator>(); }
  nlohmann::json describe() const override { return {{"kind", "oracle"}}; }
};

data::Session synth(double duration, std::uint64_t seed) {
  data::SynthConfig c;
  c.duration_s = duration;
  c.seed = seed;
  return data::generate_synthetic(c);
}

MetricResult loop_nmse(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  MetricResult r;
  r.per_joint.resize(y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    double mean = 0;
    for (Eigen::Index t = 0; t < y.rows(); ++t) mean += y(t, j);
    mean /= static_cast<double>(y.rows());
    double num = 0, den = 0;
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
      num += (p(t, j) - y(t, j)) * (p(t, j) - y(t, j));
      den += (y(t, j) - mean) * (y(t, j) - mean);
    }
    r.per_joint(j) = num / den;
    r.mean += r.per_joint(j) / static_cast<double>(y.cols());
  }
  return r;
}

}  // namespace

TEST_CASE("nmse and absolute error equal naive loops") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(200)), m = 1 + static_cast<Eigen::Index>(rng.below(15));
    const Eigen::MatrixXd y = 30.0 * testutil::randn(n, m, rng);
    const Eigen::MatrixXd p = y + 10.0 * testutil::randn(n, m, rng);
    const MetricResult a = nmse(p, y), b = loop_nmse(p, y);
    CHECK((a.per_joint - b.per_joint).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(a.mean - b.mean) < 1e-12);
    const MetricResult e = absolute_error(p, y);
    double total = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      double s = 0;
      for (Eigen::Index t = 0; t < n; ++t) s += std::abs(p(t, j) - y(t, j));
      CHECK(std::abs(e.per_joint(j) - s / static_cast<double>(n)) < 1e-12);
      total += s / static_cast<double>(n);
    }
    CHECK(std::abs(e.mean - total / static_cast<double>(m)) < 1e-12);
  }
}

TEST_CASE("metric reference points: perfect, test mean, constant bias") {
  Rng rng(2);
  const Eigen::MatrixXd y = 20.0 * testutil::randn(300, 15, rng);
  CHECK(nmse(y, y).mean == 0.0);
  CHECK(absolute_error(y, y).mean == 0.0);
  const Eigen::MatrixXd mean_pred = Eigen::MatrixXd::Ones(300, 1) * y.colwise().mean();
  CHECK(std::abs(nmse(mean_pred, y).mean - 1.0) < 1e-9);
  const Eigen::MatrixXd biased = y.array() + 5.0;
  CHECK(absolute_error(biased, y).mean == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("constant joints are excluded from NMSE instead of dividing by zero") {
  Rng rng(3);
  Eigen::MatrixXd y = testutil::randn(50, 3, rng);
  y.col(1).setConstant(90.0);
  const Eigen::MatrixXd p = y + 0.1 * testutil::randn(50, 3, rng);
  const MetricResult r = nmse(p, y);
  REQUIRE(r.excluded.size() == 1);
  CHECK(r.excluded[0] == 1);
  CHECK(std::isnan(r.per_joint(1)));
  CHECK(std::isfinite(r.mean));
  CHECK(r.mean == doctest::Approx((r.per_joint(0) + r.per_joint(2)) / 2.0));
}

TEST_CASE("per-finger scores average the three joints of each finger") {
  const auto names = data::joint_names();
  Rng rng(4);
  const Eigen::MatrixXd y = testutil::randn(100, 15, rng), p = y + testutil::randn(100, 15, rng);
  const MetricResult n = nmse(p, y), a = absolute_error(p, y);
  const auto f = per_finger(names, n, a);
  REQUIRE(f.size() == 5);
  CHECK(f[0].finger == "thumb");
  CHECK(f[4].finger == "pinky");
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(f[i].nmse == doctest::Approx(n.per_joint.segment(3 * i, 3).mean()).epsilon(1e-12));
    CHECK(f[i].abs_error == doctest::Approx(a.per_joint.segment(3 * i, 3).mean()).epsilon(1e-12));
  }
}

TEST_CASE("intra folds partition the samples and the guard keeps contexts out of the test span") {
  const data::Session s = synth(60.0, 5);
  const PreparedSession p = prepare_session(s, FeatureConfig{});
  CvConfig cfg;
  const auto plans = plan_intra_folds(p, cfg);
  REQUIRE(plans.size() == 10);
  std::vector<int> hits(p.n_samples(), 0);
  for (const auto& f : plans) {
    std::set<std::size_t> test, train, val;
    for (const auto& r : f.test) test.insert(r.sample);
    for (const auto& r : f.train) train.insert(r.sample);
    for (const auto& r : f.val) val.insert(r.sample);
    for (std::size_t i : test) ++hits[i];
    // contiguous test block
    CHECK(*test.rbegin() - *test.begin() + 1 == test.size());
    for (std::size_t i : train) {
      CHECK(test.count(i) == 0);
      CHECK(val.count(i) == 0);
    }
    for (std::size_t i : val) CHECK(test.count(i) == 0);
    CHECK(f.train.size() + f.val.size() + f.test.size() + f.guarded == p.n_samples());
    // no training or validation context touches the test time span
    const auto lo = p.context(*test.begin()).begin, hi = p.context(*test.rbegin()).end;
    const auto t_lo = static_cast<std::size_t>(p.target_index(*test.begin()));
    const auto t_hi = static_cast<std::size_t>(p.target_index(*test.rbegin()));
    for (const auto* set : {&f.train, &f.val}) {
      for (const auto& r : *set) {
        const auto c = p.context(r.sample);
        const auto t = static_cast<std::size_t>(p.target_index(r.sample));
        CHECK((c.end <= lo || c.begin >= hi));
        CHECK((t < t_lo || t > t_hi));
      }
    }
    // validation: one contiguous run of the ordered training candidates
    REQUIRE(!val.empty());
    for (std::size_t i : train) CHECK((i < *val.begin() || i > *val.rbegin()));
  }
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("too short a session for k folds is an error") {
  const data::Session s = synth(1.4, 6);
  CvConfig cfg;
  CHECK_THROWS_AS(intra_subject_cv(s, OracleBuilder{}, cfg), Error);
}

TEST_CASE("a perfect oracle scores zero through the whole harness") {
  const data::Session s = synth(40.0, 7);
  CvConfig cfg;
  cfg.k = 4;
  const EvalReport r = intra_subject_cv(s, OracleBuilder{}, cfg);
  CHECK(r.protocol == "intra");
  CHECK(r.mean_nmse == 0.0);
  CHECK(r.mean_abs_error == 0.0);
  CHECK(r.folds.size() == 4);
  REQUIRE(r.subjects.size() == 1);
  CHECK(r.predictions.rows() == r.truth.rows());
  // aggregates recomputable from the parts
  EvalReport copy = r;
  finalize(copy);
  CHECK(copy.mean_nmse == r.mean_nmse);
  const auto j = r.to_json();
  CHECK(j.contains("config"));
  CHECK(j["config"].contains("version"));
}

TEST_CASE("test-mean predictor scores exactly one at subject level") {
  Rng rng(8);
  const Eigen::MatrixXd y = 40.0 * testutil::randn(500, 15, rng).array() + 90.0;
  const Eigen::MatrixXd p = Eigen::MatrixXd::Ones(500, 1) * y.colwise().mean();
  CHECK(std::abs(nmse(p, y).mean - 1.0) < 1e-9);
}

TEST_CASE("LOSO: one fold per subject, validation elsewhere, test never in training") {
  data::SynthConfig base;
  base.duration_s = 40.0;
  base.seed = 9;
  const auto pop = data::generate_population(base, 3);
  std::vector<PreparedSession> prepared;
  for (const auto& s : pop) prepared.push_back(prepare_session(s, FeatureConfig{}));
  const auto plans = plan_loso_folds(prepared, CvConfig{});
  REQUIRE(plans.size() == 3);
  std::set<std::size_t> tested;
  for (const auto& f : plans) {
    REQUIRE(!f.test.empty());
    const std::size_t subj = f.test.front().session;
    tested.insert(subj);
    for (const auto& r : f.test) CHECK(r.session == subj);
    std::set<std::size_t> val_subj;
    for (const auto& r : f.val) {
      CHECK(r.session != subj);
      val_subj.insert(r.session);
    }
    CHECK(val_subj.size() == 1);
    for (const auto& r : f.train) {
      CHECK(r.session != subj);
      CHECK(val_subj.count(r.session) == 0);
    }
    CHECK(f.validation_subject == pop[*val_subj.begin()].subject_id);
  }
  CHECK(tested.size() == 3);

  const std::vector<data::Session> two(pop.begin(), pop.begin() + 2);
  try {
    loso_cv(two, OracleBuilder{});
    FAIL("expected kInsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
}

TEST_CASE("cross-subject error exceeds within-subject error on a synthetic population") {
  data::SynthConfig base;
  base.duration_s = 120.0;
  base.seed = 10;
  const auto pop = data::generate_population(base, 3);
  const PipelineBuilder ridge(ModelSpec::defaults(ModelKind::kRidge));
  CvConfig cfg;
  cfg.k = 5;
  std::vector<EvalReport> intra;
  for (const auto& s : pop) intra.push_back(intra_subject_cv(s, ridge, cfg));
  const EvalReport within = combine(intra);
  const EvalReport cross = loso_cv(pop, ridge, cfg);
  CHECK(cross.protocol == "loso");
  CHECK(cross.subjects.size() == 3);
  CHECK(std::isfinite(cross.mean_nmse));
  CHECK(cross.mean_nmse > within.mean_nmse);
}

TEST_CASE("PCA: a line needs one component, isotropic data needs fourteen") {
  KinematicsTrack line;
  line.fs = 100.0;
  line.angles.resize(15, 200);
  Rng rng(11);
  const Eigen::VectorXd dir = testutil::randn(15, 1, rng);
  for (Eigen::Index t = 0; t < 200; ++t) line.angles.col(t) = 90.0 * Eigen::VectorXd::Ones(15) + rng.normal() * dir;
  line.joint_names = data::joint_names();
  const PcaResult a = pca_explained_variance({line});
  CHECK(a.components_90 == 1);
  CHECK(a.cumulative_ratio(0) == doctest::Approx(1.0).epsilon(1e-10));

  // Sylvester-Hadamard rows, minus the constant column: zero-mean, orthogonal, equal norms
  Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
  while (h.rows() < 16) {
    Eigen::MatrixXd next(2 * h.rows(), 2 * h.rows());
    next << h, h, h, -h;
    h = next;
  }
  KinematicsTrack iso = line;
  iso.angles = h.rightCols(15).transpose();
  const PcaResult b = pca_explained_variance({iso});
  CHECK(b.components_90 == 14);
  for (Eigen::Index i = 1; i < 15; ++i) CHECK(b.cumulative_ratio(i) >= b.cumulative_ratio(i - 1));
  CHECK(std::abs(b.cumulative_ratio(14) - 1.0) < 1e-10);
  CHECK(b.cumulative_ratio(13) == doctest::Approx(14.0 / 15.0).epsilon(1e-12));

  KinematicsTrack flat = line;
  flat.angles.setConstant(45.0);
  const PcaResult c = pca_explained_variance({flat});
  CHECK(c.degenerate);
  CHECK(c.eigenvalues.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training-duration sweep: full fraction equals plain CV, less data is worse") {
  const data::Session s = synth(120.0, 12);
  const PipelineBuilder ridge(ModelSpec::defaults(ModelKind::kRidge));
  CvConfig cfg;
  cfg.k = 5;
  const auto rows = training_duration_sweep(s, {0.1, 0.5, 1.0}, ridge, cfg);
  REQUIRE(rows.size() == 3);
  const EvalReport full = intra_subject_cv(s, ridge, cfg);
  CHECK(rows[2].x == 1.0);
  CHECK(rows[2].mean_nmse == full.mean_nmse);
  CHECK(rows[2].mean_abs_error == full.mean_abs_error);
  CHECK(rows[0].mean_nmse > rows[2].mean_nmse);

  CHECK_THROWS_AS(training_duration_sweep(s, {1e-4}, ridge, cfg), Error);
}

TEST_CASE("timing reports the requested sample count and is repeatable") {
  const data::Session s = synth(30.0, 13);
  ModelSpec spec = ModelSpec::defaults(ModelKind::kRidge);
  TrainedModel model(spec);
  const std::vector<PreparedSession> p{prepare_session(s, spec.features)};
  const auto all = all_samples(p);
  const std::vector<SampleRef> train(all.begin(), all.begin() + static_cast<long>(all.size() * 8 / 10));
  const std::vector<SampleRef> val(all.begin() + static_cast<long>(all.size() * 8 / 10), all.end());
  model.fit(p, train, val);
  const TimingStats a = timing_benchmark(model, s.emg, 40);
  const TimingStats b = timing_benchmark(model, s.emg, 40);
  CHECK(a.n == 40);
  CHECK(a.feature_mean_ms > 0.0);
  CHECK(a.inference_mean_ms > 0.0);
  CHECK(std::abs(a.feature_mean_ms - b.feature_mean_ms) <= 0.5 * std::max(a.feature_mean_ms, b.feature_mean_ms));
}
