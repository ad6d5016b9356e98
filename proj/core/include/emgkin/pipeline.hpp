#pragma once

#include "emgkin/data.hpp"
#include "emgkin/neural/tdf.hpp"
#include "emgkin/riemann.hpp"
#include "emgkin/signal/signal.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emgkin {

enum class FeatureKind { kCmts, kTdf };
enum class ReferenceKind { kGeometric, kArithmetic };

struct FeatureConfig {
  FeatureKind kind = FeatureKind::kCmts;
  // Bands, window, step and sequence length. TDF uses the window grid only.
  riemann::CmtsConfig cmts;
  ReferenceKind reference = ReferenceKind::kGeometric;
  neural::TdfThresholds tdf;

  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
};

// A session cut into the sliding-window grid, with everything that does not
// depend on training data precomputed. Sample i covers windows
// [i, i + seq_len) and targets the angles at the last sample of window
// i + seq_len - 1.
struct PreparedSession {
  std::string subject_id;
  double fs = 0.0;
  Eigen::Index n_channels = 0;
  std::size_t seq_len = 0;
  std::vector<signal::IndexRange> windows;
  std::vector<std::vector<riemann::SpdMatrix>> covariances;  // [band][window], CMTS only
  Eigen::MatrixXd tdf;                                       // [windows x 7 ch], TDF only
  Eigen::MatrixXd targets;                                   // [samples x joints]
  std::vector<std::string> joint_names;

  std::size_t n_samples() const { return static_cast<std::size_t>(targets.rows()); }
  std::size_t n_windows() const { return windows.size(); }
  // Time index (EMG sample) of sample i's target.
  Eigen::Index target_index(std::size_t i) const;
  // EMG samples feeding sample i.
  signal::IndexRange context(std::size_t i) const;
};

// Number of samples a recording of n_samples yields (0 when too short).
std::size_t sample_count(std::size_t n_samples, double fs, const riemann::CmtsConfig& cfg);

PreparedSession prepare_session(const data::Session& s, const FeatureConfig& cfg);

struct SampleRef {
  std::size_t session = 0;
  std::size_t sample = 0;

  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

std::vector<SampleRef> all_samples(std::span<const PreparedSession> sessions);

// Training-dependent part of feature extraction: tangent references and
// per-feature standardisation statistics.
class FeatureTransform {
 public:
  FeatureTransform() = default;

  // Fits on every window touched by `train`.
  static FeatureTransform fit(const FeatureConfig& cfg, std::span<const PreparedSession> sessions,
                              std::span<const SampleRef> train, bool standardize);

  // Restores a fitted transform (artifact loading).
  FeatureTransform(FeatureConfig cfg, riemann::ReferenceSet refs, Eigen::RowVectorXd mean,
                   Eigen::RowVectorXd scale);

  const FeatureConfig& config() const { return cfg_; }
  const riemann::ReferenceSet& references() const { return refs_; }
  const Eigen::RowVectorXd& mean() const { return mean_; }
  const Eigen::RowVectorXd& scale() const { return scale_; }
  Eigen::Index window_dim() const { return mean_.size(); }
  bool fitted() const { return mean_.size() > 0; }
  // Whether the last reference fit hit the iteration cap.
  bool reference_converged() const { return converged_; }

  // [windows x window_dim], standardised.
  Eigen::MatrixXd window_features(const PreparedSession& s) const;

  // Single-sample path on the most recent context of `rec`: [seq_len x window_dim].
  Eigen::MatrixXd context_features(const EmgRecording& rec,
                                   std::span<const signal::SosCascade> filters) const;
  std::vector<signal::SosCascade> filters(double fs) const;

 private:
  Eigen::MatrixXd raw_window_features(const PreparedSession& s) const;

  FeatureConfig cfg_;
  riemann::ReferenceSet refs_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
  bool converged_ = true;
};

// Assembles model inputs from per-session window features.
// Time-major sequence: step t holds rows window(i + t) of every sample.
std::vector<Eigen::MatrixXd> assemble_sequence(std::span<const Eigen::MatrixXd> window_features,
                                               std::span<const PreparedSession> sessions,
                                               std::span<const SampleRef> refs);
// Flattened: one row per sample, windows concatenated in time order.
Eigen::MatrixXd assemble_flat(std::span<const Eigen::MatrixXd> window_features,
                              std::span<const PreparedSession> sessions,
                              std::span<const SampleRef> refs);
Eigen::MatrixXd gather_targets(std::span<const PreparedSession> sessions,
                               std::span<const SampleRef> refs);

}  // namespace emgkin
