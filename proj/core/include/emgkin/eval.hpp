#pragma once

#include "emgkin/data.hpp"
#include "emgkin/model.hpp"
#include "emgkin/pipeline.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emgkin::eval {

// Per-joint metric plus the mean over joints that were not excluded.
struct MetricResult {
  Eigen::VectorXd per_joint;          // NaN where excluded
  double mean = 0.0;
  std::vector<Eigen::Index> excluded;  // zero-variance joints (NMSE only)
};

// Sum of squared errors over the sum of squared deviations from the test
// mean, per joint. Constant joints are excluded, never divided by.
MetricResult nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

// Mean |pred - truth| per joint, in the units of the targets.
MetricResult absolute_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

struct FingerScore {
  std::string finger;
  double nmse = 0.0;
  double abs_error = 0.0;
};

// Means over joints sharing a finger prefix, in first-appearance order.
std::vector<FingerScore> per_finger(const std::vector<std::string>& joint_names, const MetricResult& nmse,
                                    const MetricResult& ae);

struct FoldResult {
  std::size_t fold = 0;
  std::string test_subject;
  std::string validation_subject;  // LOSO only
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::size_t n_guarded = 0;  // removed by the leakage guard
  std::uint64_t seed = 0;
  MetricResult nmse;
  MetricResult abs_error;
  nlohmann::json model;
};

struct SubjectResult {
  std::string subject;
  MetricResult nmse;
  MetricResult abs_error;
  std::vector<FingerScore> fingers;
};

struct TimingStats {
  std::size_t n = 0;
  double feature_mean_ms = 0.0;
  double feature_std_ms = 0.0;
  double inference_mean_ms = 0.0;
  double inference_std_ms = 0.0;
};

struct EvalReport {
  std::string protocol;  // "intra" or "loso"
  std::string model;
  std::vector<std::string> joint_names;
  std::vector<FoldResult> folds;
  std::vector<SubjectResult> subjects;
  // Across subjects: mean and population standard deviation.
  double mean_nmse = 0.0;
  double std_nmse = 0.0;
  double mean_abs_error = 0.0;
  double std_abs_error = 0.0;
  std::vector<FingerScore> fingers;
  std::optional<TimingStats> timing;
  nlohmann::json config;
  std::vector<std::string> warnings;
  // Concatenated test predictions and targets (intra: one subject).
  Eigen::MatrixXd predictions;
  Eigen::MatrixXd truth;

  nlohmann::json to_json() const;
  std::string summary() const;
};

// Recomputes the across-subject aggregates from `subjects`.
void finalize(EvalReport& report);

// Merges single-subject reports of the same protocol into one.
EvalReport combine(const std::vector<EvalReport>& reports);

struct CvConfig {
  std::size_t k = 10;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  bool leakage_guard = true;
  // Training-duration ablation: keep one random contiguous segment of this
  // fraction of each fold's training portion.
  double train_fraction = 1.0;
  std::size_t threads = 0;  // 0 = default_threads()

  nlohmann::json to_json() const;
};

struct FoldPlan {
  std::vector<SampleRef> train;
  std::vector<SampleRef> val;
  std::vector<SampleRef> test;
  std::size_t guarded = 0;
  std::uint64_t model_seed = 0;
  std::string validation_subject;
};

// Contiguous k-fold partition of one prepared session (session index 0).
std::vector<FoldPlan> plan_intra_folds(const PreparedSession& s, const CvConfig& cfg);

// One fold per subject; validation is one other subject chosen by seed.
std::vector<FoldPlan> plan_loso_folds(const std::vector<PreparedSession>& sessions, const CvConfig& cfg);

EvalReport intra_subject_cv(const data::Session& s, const ModelBuilder& builder, const CvConfig& cfg = {});
EvalReport intra_subject_cv(const PreparedSession& s, const ModelBuilder& builder, const CvConfig& cfg = {});

// EMG is standardised per subject before pooling. Needs >= 3 subjects.
EvalReport loso_cv(const std::vector<data::Session>& sessions, const ModelBuilder& builder,
                   const CvConfig& cfg = {});

struct PcaResult {
  Eigen::VectorXd eigenvalues;       // descending
  Eigen::VectorXd cumulative_ratio;  // non-decreasing, ends at 1
  std::size_t components_90 = 0;     // smallest m with ratio >= 0.9
  bool degenerate = false;           // constant data: all eigenvalues zero
};

PcaResult pca_explained_variance(const std::vector<KinematicsTrack>& tracks);

struct SweepRow {
  double x = 0.0;
  double mean_nmse = 0.0;
  double mean_abs_error = 0.0;
};

std::vector<SweepRow> training_duration_sweep(const data::Session& s, const std::vector<double>& fractions,
                                              const ModelBuilder& builder, const CvConfig& cfg = {});

// Per-sample wall-clock cost of feature extraction and of inference on
// contexts drawn from `rec`, after one untimed warm-up sample. The
// acquisition band-pass is not part of the timed path.
TimingStats timing_benchmark(const TrainedModel& model, const EmgRecording& rec, std::size_t n = 500);

// Feature extraction only, for comparing pipelines without a trained model.
TimingStats feature_timing(const FeatureTransform& transform, const EmgRecording& rec, std::size_t n = 500);

}  // namespace emgkin::eval
