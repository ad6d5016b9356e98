#pragma once

#include "emgkin/neural/network.hpp"
#include "emgkin/neural/ridge.hpp"
#include "emgkin/neural/train.hpp"
#include "emgkin/pipeline.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emgkin {

enum class ModelKind { kTrr, kTrrSimplified, kMlpTdf, kMlpCmts, kRidge };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

// Everything needed to build and train one model.
struct ModelSpec {
  ModelKind kind = ModelKind::kTrr;
  FeatureConfig features;
  neural::TrainConfig train;
  neural::TrrShape trr;
  std::vector<Eigen::Index> mlp_hidden = {256, 256, 128, 64};
  std::vector<double> ridge_grid = neural::default_lambda_grid();
  bool standardize_features = true;
  bool standardize_targets = true;

  // Kind-specific defaults: bands, feature type, batch size.
  static ModelSpec defaults(ModelKind kind);

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// What the evaluation harness trains and queries.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual void fit(std::span<const PreparedSession> sessions, std::span<const SampleRef> train,
                   std::span<const SampleRef> val) = 0;
  virtual Eigen::MatrixXd predict(std::span<const PreparedSession> sessions,
                                  std::span<const SampleRef> samples) const = 0;
  // Training summary for reports (best epoch, chosen lambda, ...).
  virtual nlohmann::json summary() const { return nlohmann::json::object(); }
};

class ModelBuilder {
 public:
  virtual ~ModelBuilder() = default;
  virtual std::string name() const = 0;
  virtual PreparedSession prepare(const data::Session& s) const = 0;
  virtual std::unique_ptr<Estimator> create(std::uint64_t seed) const = 0;
  virtual nlohmann::json describe() const = 0;
};

// Feature transform + regressor + target scaling, trained end to end.
class TrainedModel : public Estimator {
 public:
  explicit TrainedModel(ModelSpec spec);

  void fit(std::span<const PreparedSession> sessions, std::span<const SampleRef> train,
           std::span<const SampleRef> val) override;
  Eigen::MatrixXd predict(std::span<const PreparedSession> sessions,
                          std::span<const SampleRef> samples) const override;
  nlohmann::json summary() const override;

  // Every sample of a raw session, in time order.
  Eigen::MatrixXd predict_session(const data::Session& s) const;

  // Single-sample path: features from the latest context, then inference.
  Eigen::MatrixXd extract_features(const EmgRecording& context,
                                   std::span<const signal::SosCascade> filters) const;
  Eigen::RowVectorXd infer(const Eigen::MatrixXd& features) const;

  const ModelSpec& spec() const { return spec_; }
  const FeatureTransform& transform() const { return transform_; }
  const neural::TrainingLog& log() const { return log_; }
  const neural::Network& network() const { return net_; }
  const std::optional<neural::RidgeModel>& ridge() const { return ridge_; }
  const std::vector<std::string>& joint_names() const { return joint_names_; }
  double fs() const { return fs_; }
  bool fitted() const { return fitted_; }

  // Free-form run configuration embedded in saved artifacts.
  nlohmann::json run_config = nlohmann::json::object();

  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  bool is_sequence_model() const;
  Eigen::MatrixXd regress(const std::vector<Eigen::MatrixXd>& seq, const Eigen::MatrixXd& flat) const;

  ModelSpec spec_;
  FeatureTransform transform_;
  neural::Network net_;
  std::optional<neural::RidgeModel> ridge_;
  neural::TrainingLog log_;
  Eigen::RowVectorXd target_mean_;
  Eigen::RowVectorXd target_scale_;
  std::vector<std::string> joint_names_;
  double fs_ = 0.0;
  bool fitted_ = false;
};

class PipelineBuilder : public ModelBuilder {
 public:
  explicit PipelineBuilder(ModelSpec spec) : spec_(std::move(spec)) {}
  std::string name() const override { return std::string(to_string(spec_.kind)); }
  PreparedSession prepare(const data::Session& s) const override {
    return prepare_session(s, spec_.features);
  }
  std::unique_ptr<Estimator> create(std::uint64_t seed) const override;
  nlohmann::json describe() const override { return spec_.to_json(); }
  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
};

// Version string embedded in artifacts and reports.
std::string_view version_string() noexcept;

}  // namespace emgkin
