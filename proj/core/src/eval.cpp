#include "emgkin/eval.hpp"

#include "emgkin/error.hpp"
#include "emgkin/parallel.hpp"
#include "emgkin/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace emgkin::eval {

namespace {

void check_shapes(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "prediction is " + std::to_string(pred.rows()) + "x" +
                                               std::to_string(pred.cols()) + ", truth is " +
                                               std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }
  if (truth.rows() == 0) throw Error(ErrorKind::kInsufficientData, "metrics need at least one sample");
}

double mean_of_included(const Eigen::VectorXd& v) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isnan(v(i))) {
      sum += v(i);
      ++n;
    }
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i))) {
      a.push_back(nullptr);
    } else {
      a.push_back(v(i));
    }
  }
  return a;
}

nlohmann::json metric_json(const MetricResult& m) {
  return {{"per_joint", vec_json(m.per_joint)}, {"mean", m.mean}, {"excluded", m.excluded}};
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

void add_exclusion_warnings(EvalReport& r, const std::string& subject, const MetricResult& m) {
  for (Eigen::Index j : m.excluded) {
    const std::string name = j < static_cast<Eigen::Index>(r.joint_names.size())
                                 ? r.joint_names[static_cast<std::size_t>(j)]
                                 : std::to_string(j);
    r.warnings.push_back("subject " + subject + ": joint " + name +
                         " has zero test variance and is excluded from NMSE");
  }
}

SubjectResult subject_result(const std::string& subject, const std::vector<std::string>& joints,
                             const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  SubjectResult s;
  s.subject = subject;
  s.nmse = nmse(pred, truth);
  s.abs_error = absolute_error(pred, truth);
  s.fingers = per_finger(joints, s.nmse, s.abs_error);
  return s;
}

struct FoldOutput {
  Eigen::MatrixXd pred;
  Eigen::MatrixXd truth;
  nlohmann::json model;
};

std::vector<FoldOutput> run_folds(const std::vector<PreparedSession>& sessions, const std::vector<FoldPlan>& plans,
                                  const ModelBuilder& builder, const CvConfig& cfg) {
  std::vector<FoldOutput> out(plans.size());
  parallel_for(plans.size(), cfg.threads, [&](std::size_t f) {
    const auto& p = plans[f];
    auto est = builder.create(p.model_seed);
    est->fit(sessions, p.train, p.val);
    out[f].pred = est->predict(sessions, p.test);
    out[f].truth = gather_targets(sessions, p.test);
    out[f].model = est->summary();
  });
  return out;
}

FoldResult fold_result(std::size_t f, const FoldPlan& p, const FoldOutput& o, const std::string& subject) {
  FoldResult r;
  r.fold = f;
  r.test_subject = subject;
  r.validation_subject = p.validation_subject;
  r.n_train = p.train.size();
  r.n_val = p.val.size();
  r.n_test = p.test.size();
  r.n_guarded = p.guarded;
  r.seed = p.model_seed;
  r.nmse = nmse(o.pred, o.truth);
  r.abs_error = absolute_error(o.pred, o.truth);
  r.model = o.model;
  return r;
}

}  // namespace

MetricResult nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  check_shapes(pred, truth);
  MetricResult m;
  m.per_joint.resize(truth.cols());
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const double mean = truth.col(j).mean();
    const double den = (truth.col(j).array() - mean).square().sum();
    const double num = (pred.col(j) - truth.col(j)).squaredNorm();
    const double scale = std::max(1.0, std::abs(mean));
    if (!(den > 1e-24 * scale * scale * static_cast<double>(truth.rows()))) {
      m.per_joint(j) = std::numeric_limits<double>::quiet_NaN();
      m.excluded.push_back(j);
    } else {
      m.per_joint(j) = num / den;
    }
  }
  m.mean = mean_of_included(m.per_joint);
  return m;
}

MetricResult absolute_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  check_shapes(pred, truth);
  MetricResult m;
  m.per_joint = (pred - truth).cwiseAbs().colwise().mean().transpose();
  m.mean = m.per_joint.mean();
  return m;
}

std::vector<FingerScore> per_finger(const std::vector<std::string>& joint_names, const MetricResult& nmse_r,
                                    const MetricResult& ae) {
  std::vector<FingerScore> out;
  std::vector<int> n_nmse;
  std::vector<int> n_ae;
  for (std::size_t j = 0; j < joint_names.size(); ++j) {
    const std::string finger = data::finger_of(joint_names[j]);
    auto it = std::find_if(out.begin(), out.end(), [&](const FingerScore& f) { return f.finger == finger; });
    if (it == out.end()) {
      out.push_back({finger, 0.0, 0.0});
      n_nmse.push_back(0);
      n_ae.push_back(0);
      it = out.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - out.begin());
    const auto jj = static_cast<Eigen::Index>(j);
    if (jj < nmse_r.per_joint.size() && !std::isnan(nmse_r.per_joint(jj))) {
      it->nmse += nmse_r.per_joint(jj);
      ++n_nmse[k];
    }
    if (jj < ae.per_joint.size()) {
      it->abs_error += ae.per_joint(jj);
      ++n_ae[k];
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].nmse = n_nmse[k] ? out[k].nmse / n_nmse[k] : std::numeric_limits<double>::quiet_NaN();
    out[k].abs_error = n_ae[k] ? out[k].abs_error / n_ae[k] : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void finalize(EvalReport& r) {
  std::vector<double> n, a;
  for (const auto& s : r.subjects) {
    n.push_back(s.nmse.mean);
    a.push_back(s.abs_error.mean);
  }
  std::tie(r.mean_nmse, r.std_nmse) = mean_std(n);
  std::tie(r.mean_abs_error, r.std_abs_error) = mean_std(a);
  r.fingers.clear();
  for (const auto& s : r.subjects) {
    for (const auto& f : s.fingers) {
      auto it = std::find_if(r.fingers.begin(), r.fingers.end(), [&](const FingerScore& g) { return g.finger == f.finger; });
      if (it == r.fingers.end()) {
        r.fingers.push_back({f.finger, 0.0, 0.0});
        it = r.fingers.end() - 1;
      }
      it->nmse += f.nmse / static_cast<double>(r.subjects.size());
      it->abs_error += f.abs_error / static_cast<double>(r.subjects.size());
    }
  }
}

EvalReport combine(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::kInvalidInput, "nothing to combine");
  EvalReport out;
  out.protocol = reports.front().protocol;
  out.model = reports.front().model;
  out.joint_names = reports.front().joint_names;
  out.config = reports.front().config;
  for (const auto& r : reports) {
    for (auto f : r.folds) {
      f.fold = out.folds.size();
      out.folds.push_back(std::move(f));
    }
    out.subjects.insert(out.subjects.end(), r.subjects.begin(), r.subjects.end());
    out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  if (reports.size() == 1) {
    out.predictions = reports.front().predictions;
    out.truth = reports.front().truth;
    out.timing = reports.front().timing;
  }
  finalize(out);
  return out;
}

nlohmann::json CvConfig::to_json() const {
  return {{"k", k},           {"val_fraction", val_fraction},     {"seed", seed},
          {"leakage_guard", leakage_guard}, {"train_fraction", train_fraction}};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["model"] = model;
  j["nmse_definition"] = "per joint: sum (pred - y)^2 / sum (y - mean_test(y))^2, averaged over joints";
  j["joint_names"] = joint_names;
  j["mean_nmse"] = mean_nmse;
  j["std_nmse"] = std_nmse;
  j["mean_abs_error_deg"] = mean_abs_error;
  j["std_abs_error_deg"] = std_abs_error;
  auto fingers_j = nlohmann::json::array();
  for (const auto& f : fingers) fingers_j.push_back({{"finger", f.finger}, {"nmse", f.nmse}, {"abs_error_deg", f.abs_error}});
  j["fingers"] = fingers_j;
  auto subj = nlohmann::json::array();
  for (const auto& s : subjects) {
    subj.push_back({{"subject", s.subject}, {"nmse", metric_json(s.nmse)}, {"abs_error_deg", metric_json(s.abs_error)}});
  }
  j["subjects"] = subj;
  auto folds_j = nlohmann::json::array();
  for (const auto& f : folds) {
    folds_j.push_back({{"fold", f.fold},
                       {"test_subject", f.test_subject},
                       {"validation_subject", f.validation_subject},
                       {"n_train", f.n_train},
                       {"n_val", f.n_val},
                       {"n_test", f.n_test},
                       {"n_guarded", f.n_guarded},
                       {"seed", f.seed},
                       {"nmse", metric_json(f.nmse)},
                       {"abs_error_deg", metric_json(f.abs_error)},
                       {"model", f.model}});
  }
  j["folds"] = folds_j;
  if (timing) {
    j["timing"] = {{"n", timing->n},
                   {"feature_mean_ms", timing->feature_mean_ms},
                   {"feature_std_ms", timing->feature_std_ms},
                   {"inference_mean_ms", timing->inference_mean_ms},
                   {"inference_std_ms", timing->inference_std_ms}};
  }
  j["warnings"] = warnings;
  j["config"] = config;
  return j;
}

std::string EvalReport::summary() const {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4);
  o << "protocol: " << protocol << "  model: " << model << "  subjects: " << subjects.size()
    << "  folds: " << folds.size() << '\n';
  o << "NMSE: per joint, SSE / sum of squared deviations from the test mean\n";
  o << "mean NMSE " << mean_nmse << " +/- " << std_nmse << "   mean abs error " << std::setprecision(2)
    << mean_abs_error << " +/- " << std_abs_error << " deg\n";
  o << std::setprecision(4);
  for (const auto& s : subjects) {
    o << "  " << s.subject << ": NMSE " << s.nmse.mean << "  AE " << std::setprecision(2) << s.abs_error.mean
      << " deg" << std::setprecision(4) << '\n';
  }
  if (!fingers.empty()) {
    o << "per finger:\n";
    for (const auto& f : fingers) {
      o << "  " << std::left << std::setw(8) << f.finger << std::right << " NMSE " << f.nmse << "  AE "
        << std::setprecision(2) << f.abs_error << " deg" << std::setprecision(4) << '\n';
    }
  }
  if (timing) {
    o << std::setprecision(3) << "timing (n=" << timing->n << "): features " << timing->feature_mean_ms << " +/- "
      << timing->feature_std_ms << " ms, inference " << timing->inference_mean_ms << " +/- "
      << timing->inference_std_ms << " ms\n";
  }
  for (const auto& w : warnings) o << "warning: " << w << '\n';
  return o.str();
}

std::vector<FoldPlan> plan_intra_folds(const PreparedSession& s, const CvConfig& cfg) {
  const std::size_t n = s.n_samples();
  if (cfg.k < 2) throw Error(ErrorKind::kInvalidInput, "k must be >= 2");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidInput, "validation fraction must be in (0, 1)");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    throw Error(ErrorKind::kInvalidInput, "training fraction must be in (0, 1]");
  }
  if (n < cfg.k) {
    throw Error(ErrorKind::kInsufficientData, "session " + s.subject_id + " has " + std::to_string(n) +
                                                  " samples, fewer than k = " + std::to_string(cfg.k) + " folds");
  }
  std::vector<FoldPlan> plans(cfg.k);
  for (std::size_t f = 0; f < cfg.k; ++f) {
    auto& p = plans[f];
    const std::size_t a = f * n / cfg.k;
    const std::size_t b = (f + 1) * n / cfg.k;
    const std::size_t span_begin = s.context(a).begin;
    const std::size_t span_end = s.context(b - 1).end;
    std::vector<SampleRef> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= a && i < b) {
        p.test.push_back({0, i});
        continue;
      }
      const auto ctx = s.context(i);
      if (cfg.leakage_guard && ctx.end > span_begin && ctx.begin < span_end) {
        ++p.guarded;
        continue;
      }
      candidates.push_back({0, i});
    }
    Rng rng(derive_seed(derive_seed(cfg.seed, "intra-split"), f));
    if (cfg.train_fraction < 1.0) {
      const auto len = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(candidates.size())));
      if (len < 2) {
        throw Error(ErrorKind::kInsufficientData,
                    "training fraction " + std::to_string(cfg.train_fraction) + " leaves fewer than 2 samples");
      }
      const auto start = rng.below(candidates.size() - len + 1);
      candidates = std::vector<SampleRef>(candidates.begin() + static_cast<std::ptrdiff_t>(start),
                                          candidates.begin() + static_cast<std::ptrdiff_t>(start + len));
    }
    if (candidates.size() < 2) {
      throw Error(ErrorKind::kInsufficientData, "fold " + std::to_string(f) + " has fewer than 2 training samples");
    }
    const std::size_t m = candidates.size();
    const std::size_t v = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(m))), 1, m - 1);
    const auto vs = rng.below(m - v + 1);
    for (std::size_t i = 0; i < m; ++i) {
      (i >= vs && i < vs + v ? p.val : p.train).push_back(candidates[i]);
    }
    p.model_seed = derive_seed(derive_seed(cfg.seed, "intra-model"), f);
  }
  return plans;
}

std::vector<FoldPlan> plan_loso_folds(const std::vector<PreparedSession>& sessions, const CvConfig& cfg) {
  const std::size_t n = sessions.size();
  if (n < 3) {
    throw Error(ErrorKind::kInsufficientData,
                "leave-one-subject-out needs >= 3 subjects, got " + std::to_string(n));
  }
  std::vector<FoldPlan> plans(n);
  for (std::size_t f = 0; f < n; ++f) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "loso-validation"), f));
    std::size_t val = rng.below(n - 1);
    if (val >= f) ++val;
    auto& p = plans[f];
    p.validation_subject = sessions[val].subject_id;
    for (std::size_t s = 0; s < n; ++s) {
      auto& dst = s == f ? p.test : (s == val ? p.val : p.train);
      for (std::size_t i = 0; i < sessions[s].n_samples(); ++i) dst.push_back({s, i});
    }
    p.model_seed = derive_seed(derive_seed(cfg.seed, "loso-model"), f);
  }
  return plans;
}

EvalReport intra_subject_cv(const data::Session& s, const ModelBuilder& builder, const CvConfig& cfg) {
  return intra_subject_cv(builder.prepare(s), builder, cfg);
}

EvalReport intra_subject_cv(const PreparedSession& s, const ModelBuilder& builder, const CvConfig& cfg) {
  const auto plans = plan_intra_folds(s, cfg);
  const std::vector<PreparedSession> sessions{s};
  const auto outputs = run_folds(sessions, plans, builder, cfg);

  EvalReport r;
  r.protocol = "intra";
  r.model = builder.name();
  r.joint_names = s.joint_names;
  r.config = {{"cv", cfg.to_json()}, {"model", builder.describe()}, {"version", std::string(version_string())}};
  const Eigen::Index J = s.targets.cols();
  std::size_t total = 0;
  for (const auto& o : outputs) total += static_cast<std::size_t>(o.pred.rows());
  r.predictions.resize(static_cast<Eigen::Index>(total), J);
  r.truth.resize(static_cast<Eigen::Index>(total), J);
  Eigen::Index row = 0;
  for (std::size_t f = 0; f < plans.size(); ++f) {
    const auto& o = outputs[f];
    r.predictions.middleRows(row, o.pred.rows()) = o.pred;
    r.truth.middleRows(row, o.truth.rows()) = o.truth;
    row += o.pred.rows();
    r.folds.push_back(fold_result(f, plans[f], o, s.subject_id));
  }
  r.subjects.push_back(subject_result(s.subject_id, s.joint_names, r.predictions, r.truth));
  add_exclusion_warnings(r, s.subject_id, r.subjects.back().nmse);
  finalize(r);
  return r;
}

EvalReport loso_cv(const std::vector<data::Session>& sessions, const ModelBuilder& builder, const CvConfig& cfg) {
  if (sessions.size() < 3) {
    throw Error(ErrorKind::kInsufficientData,
                "leave-one-subject-out needs >= 3 subjects, got " + std::to_string(sessions.size()));
  }
  std::vector<PreparedSession> prepared;
  for (const auto& s : sessions) {
    data::Session z = s;
    z.emg = signal::standardize_per_channel(s.emg).rec;
    prepared.push_back(builder.prepare(z));
  }
  const auto plans = plan_loso_folds(prepared, cfg);
  const auto outputs = run_folds(prepared, plans, builder, cfg);

  EvalReport r;
  r.protocol = "loso";
  r.model = builder.name();
  r.joint_names = prepared.front().joint_names;
  r.config = {{"cv", cfg.to_json()}, {"model", builder.describe()}, {"version", std::string(version_string())}};
  for (std::size_t f = 0; f < plans.size(); ++f) {
    const auto& subject = prepared[f].subject_id;
    r.folds.push_back(fold_result(f, plans[f], outputs[f], subject));
    r.subjects.push_back(subject_result(subject, r.joint_names, outputs[f].pred, outputs[f].truth));
    add_exclusion_warnings(r, subject, r.subjects.back().nmse);
  }
  finalize(r);
  return r;
}

PcaResult pca_explained_variance(const std::vector<KinematicsTrack>& tracks) {
  if (tracks.empty()) throw Error(ErrorKind::kInsufficientData, "no tracks");
  const Eigen::Index J = tracks.front().n_joints();
  Eigen::Index total = 0;
  for (const auto& t : tracks) {
    if (t.n_joints() != J) throw Error(ErrorKind::kShapeMismatch, "tracks differ in joint count");
    total += t.n_samples();
  }
  if (total < J) {
    throw Error(ErrorKind::kInsufficientData, "PCA needs at least as many samples as joints");
  }
  Eigen::MatrixXd x(J, total);
  Eigen::Index c = 0;
  for (const auto& t : tracks) {
    x.middleCols(c, t.n_samples()) = t.angles;
    c += t.n_samples();
  }
  const Eigen::VectorXd mean = x.rowwise().mean();
  x.colwise() -= mean;
  const Eigen::MatrixXd cov = x * x.transpose() / static_cast<double>(total);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  PcaResult r;
  r.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
  const double sum = r.eigenvalues.sum();
  const double scale = std::max(1.0, mean.cwiseAbs().maxCoeff());
  r.cumulative_ratio = Eigen::VectorXd::Zero(J);
  if (!(sum > 1e-20 * scale * scale)) {
    r.degenerate = true;
    r.eigenvalues.setZero();
    return r;
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < J; ++i) {
    acc += r.eigenvalues(i);
    r.cumulative_ratio(i) = acc / sum;
  }
  r.cumulative_ratio(J - 1) = 1.0;
  for (Eigen::Index i = 0; i < J; ++i) {
    if (r.cumulative_ratio(i) >= 0.9 - 1e-12) {
      r.components_90 = static_cast<std::size_t>(i + 1);
      break;
    }
  }
  return r;
}

std::vector<SweepRow> training_duration_sweep(const data::Session& s, const std::vector<double>& fractions,
                                              const ModelBuilder& builder, const CvConfig& cfg) {
  const PreparedSession p = builder.prepare(s);
  std::vector<SweepRow> out;
  for (double f : fractions) {
    CvConfig c = cfg;
    c.train_fraction = f;
    const EvalReport r = intra_subject_cv(p, builder, c);
    out.push_back({f, r.mean_nmse, r.mean_abs_error});
  }
  return out;
}

namespace {

std::vector<EmgRecording> draw_contexts(const EmgRecording& rec, double context_ms, std::size_t n) {
  const auto ctx = static_cast<Eigen::Index>(signal::ms_to_samples(context_ms, rec.fs));
  if (rec.n_samples() < ctx) {
    throw Error(ErrorKind::kInsufficientData, "recording shorter than one feature context");
  }
  const Eigen::Index span = rec.n_samples() - ctx;
  std::vector<EmgRecording> out;
  out.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const Eigen::Index start = n ? static_cast<Eigen::Index>(i) * span / static_cast<Eigen::Index>(n) : 0;
    EmgRecording c;
    c.fs = rec.fs;
    c.channel_names = rec.channel_names;
    c.data = rec.data.middleCols(start, ctx);
    out.push_back(std::move(c));
  }
  return out;
}

std::pair<double, double> ms_stats(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0};
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

TimingStats timing_benchmark(const TrainedModel& model, const EmgRecording& rec, std::size_t n) {
  const auto contexts = draw_contexts(rec, model.spec().features.cmts.context_ms(), n);
  const auto filters = model.transform().filters(rec.fs);
  // warm-up
  volatile double sink = model.infer(model.extract_features(contexts[0], filters))(0);
  std::vector<double> feat_ms, inf_ms;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto t0 = Clock::now();
    const Eigen::MatrixXd f = model.extract_features(contexts[i], filters);
    const auto t1 = Clock::now();
    const Eigen::RowVectorXd y = model.infer(f);
    const auto t2 = Clock::now();
    sink = sink + y(0);
    feat_ms.push_back(elapsed_ms(t0, t1));
    inf_ms.push_back(elapsed_ms(t1, t2));
  }
  (void)sink;
  TimingStats t;
  t.n = n;
  std::tie(t.feature_mean_ms, t.feature_std_ms) = ms_stats(feat_ms);
  std::tie(t.inference_mean_ms, t.inference_std_ms) = ms_stats(inf_ms);
  return t;
}

TimingStats feature_timing(const FeatureTransform& transform, const EmgRecording& rec, std::size_t n) {
  const auto contexts = draw_contexts(rec, transform.config().cmts.context_ms(), n);
  const auto filters = transform.filters(rec.fs);
  volatile double sink = transform.context_features(contexts[0], filters)(0, 0);
  std::vector<double> feat_ms;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto t0 = Clock::now();
    const Eigen::MatrixXd f = transform.context_features(contexts[i], filters);
    const auto t1 = Clock::now();
    sink = sink + f(0, 0);
    feat_ms.push_back(elapsed_ms(t0, t1));
  }
  (void)sink;
  TimingStats t;
  t.n = n;
  std::tie(t.feature_mean_ms, t.feature_std_ms) = ms_stats(feat_ms);
  return t;
}

}  // namespace emgkin::eval
