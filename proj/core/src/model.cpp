#include "emgkin/model.hpp"

#include "emgkin/error.hpp"
#include "emgkin/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#ifndef EMGKIN_VERSION_STRING
#define EMGKIN_VERSION_STRING "0.0.0-unknown"
#endif

namespace emgkin {

std::string_view version_string() noexcept { return EMGKIN_VERSION_STRING; }

namespace {

constexpr char kModelMagic[8] = {'E', 'M', 'G', 'K', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kModelVersion = 1;

struct KindName {
  ModelKind kind;
  std::string_view name;
};
constexpr KindName kKindNames[] = {
    {ModelKind::kTrr, "trr"},         {ModelKind::kTrrSimplified, "trr-simplified"},
    {ModelKind::kMlpTdf, "mlp-tdf"}, {ModelKind::kMlpCmts, "mlp-cmts"},
    {ModelKind::kRidge, "ridge"},
};

nlohmann::json train_config_json(const neural::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"clip_norm", c.clip_norm},
          {"patience", c.patience},           {"huber_delta", c.huber_delta}, {"dropout", c.dropout},
          {"max_epochs", c.max_epochs},       {"seed", c.seed},               {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},         {"shuffle", c.shuffle}};
}

neural::TrainConfig train_config_from_json(const nlohmann::json& j) {
  neural::TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.patience = j.at("patience").get<std::size_t>();
  c.huber_delta = j.at("huber_delta").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.shuffle = j.at("shuffle").get<bool>();
  return c;
}

nlohmann::json log_json(const neural::TrainingLog& log) {
  auto epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) epochs.push_back({e.epoch, e.train_loss, e.val_loss});
  return {{"epochs", epochs},
          {"best_epoch", log.best_epoch},
          {"best_val_loss", log.best_val_loss},
          {"early_stopped", log.early_stopped},
          {"raw_grad_norms", log.raw_grad_norms},
          {"applied_grad_norms", log.applied_grad_norms}};
}

neural::TrainingLog log_from_json(const nlohmann::json& j) {
  neural::TrainingLog log;
  for (const auto& e : j.at("epochs")) {
    log.epochs.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>()});
  }
  log.best_epoch = j.at("best_epoch").get<std::size_t>();
  log.best_val_loss = j.at("best_val_loss").get<double>();
  log.early_stopped = j.at("early_stopped").get<bool>();
  log.raw_grad_norms = j.at("raw_grad_norms").get<std::vector<double>>();
  log.applied_grad_norms = j.at("applied_grad_norms").get<std::vector<double>>();
  return log;
}

nlohmann::json architecture_json(const neural::Network& net) {
  auto layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json j{{"kind", std::string(neural::to_string(l->kind()))},
                     {"in", l->input_dim()},
                     {"out", l->output_dim()}};
    if (const auto* d = dynamic_cast<const neural::Dense*>(l.get())) {
      j["activation"] = std::string(neural::to_string(d->activation()));
    } else if (const auto* dr = dynamic_cast<const neural::Dropout*>(l.get())) {
      j["rate"] = dr->rate();
    }
    layers.push_back(j);
  }
  return layers;
}

neural::Network network_from_json(const nlohmann::json& layers) {
  neural::Network net;
  for (const auto& j : layers) {
    const auto kind = j.at("kind").get<std::string>();
    const auto in = j.at("in").get<Eigen::Index>();
    const auto out = j.at("out").get<Eigen::Index>();
    if (kind == "dense") {
      const auto act = j.at("activation").get<std::string>() == "tanh" ? neural::Activation::kTanh
                                                                       : neural::Activation::kLinear;
      net.add(std::make_unique<neural::Dense>(in, out, act));
    } else if (kind == "gru") {
      net.add(std::make_unique<neural::Gru>(in, out));
    } else if (kind == "dropout") {
      net.add(std::make_unique<neural::Dropout>(in, j.at("rate").get<double>()));
    } else if (kind == "last_step") {
      net.add(std::make_unique<neural::LastStep>(in));
    } else {
      throw Error(ErrorKind::kValidation, "model: unknown layer kind '" + kind + "'");
    }
  }
  return net;
}

void write_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& i) {
  std::uint32_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& i) {
  std::uint64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_tensor(std::ostream& o, const std::string& name, const Eigen::MatrixXd& m) {
  write_u32(o, static_cast<std::uint32_t>(name.size()));
  o.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(o, static_cast<std::uint32_t>(m.rows()));
  write_u32(o, static_cast<std::uint32_t>(m.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  o.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

Eigen::RowVectorXd safe_scale(Eigen::RowVectorXd sd, const Eigen::RowVectorXd& mean) {
  for (Eigen::Index c = 0; c < sd.size(); ++c) {
    if (!(sd(c) > 1e-12 * std::max(1.0, std::abs(mean(c))))) sd(c) = 1.0;
  }
  return sd;
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  throw Error(ErrorKind::kInvalidInput,
              "unknown model kind '" + std::string(name) + "' (trr, trr-simplified, mlp-tdf, mlp-cmts, ridge)");
}

ModelSpec ModelSpec::defaults(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::kTrrSimplified:
      s.features.cmts.bands = {{5.0, 150.0}};
      break;
    case ModelKind::kMlpTdf:
      s.features.kind = FeatureKind::kTdf;
      s.train.batch_size = 512;
      break;
    case ModelKind::kMlpCmts:
      s.train.batch_size = 512;
      break;
    case ModelKind::kTrr:
    case ModelKind::kRidge:
      break;
  }
  return s;
}

nlohmann::json ModelSpec::to_json() const {
  return {{"kind", std::string(to_string(kind))},
          {"features", features.to_json()},
          {"train", train_config_json(train)},
          {"trr", {trr.dense_units, trr.gru1_units, trr.gru2_units, trr.head_units}},
          {"mlp_hidden", mlp_hidden},
          {"ridge_grid", ridge_grid},
          {"standardize_features", standardize_features},
          {"standardize_targets", standardize_targets}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.features = FeatureConfig::from_json(j.at("features"));
  s.train = train_config_from_json(j.at("train"));
  const auto& t = j.at("trr");
  s.trr.dense_units = t.at(0).get<Eigen::Index>();
  s.trr.gru1_units = t.at(1).get<Eigen::Index>();
  s.trr.gru2_units = t.at(2).get<Eigen::Index>();
  s.trr.head_units = t.at(3).get<Eigen::Index>();
  s.trr.dropout = s.train.dropout;
  s.mlp_hidden = j.at("mlp_hidden").get<std::vector<Eigen::Index>>();
  s.ridge_grid = j.at("ridge_grid").get<std::vector<double>>();
  s.standardize_features = j.at("standardize_features").get<bool>();
  s.standardize_targets = j.at("standardize_targets").get<bool>();
  return s;
}

TrainedModel::TrainedModel(ModelSpec spec) : spec_(std::move(spec)) {}

bool TrainedModel::is_sequence_model() const {
  return spec_.kind == ModelKind::kTrr || spec_.kind == ModelKind::kTrrSimplified;
}

void TrainedModel::fit(std::span<const PreparedSession> sessions, std::span<const SampleRef> train,
                       std::span<const SampleRef> val) {
  if (train.empty() || val.empty()) {
    throw Error(ErrorKind::kInvalidInput, "training and validation sets must be non-empty");
  }
  const auto& first = sessions[train.front().session];
  joint_names_ = first.joint_names;
  fs_ = first.fs;
  transform_ = FeatureTransform::fit(spec_.features, sessions, train, spec_.standardize_features);

  std::set<std::size_t> used;
  for (const auto& r : train) used.insert(r.session);
  for (const auto& r : val) used.insert(r.session);
  std::vector<Eigen::MatrixXd> feats(sessions.size());
  for (std::size_t s : used) feats[s] = transform_.window_features(sessions[s]);

  const Eigen::MatrixXd y_train = gather_targets(sessions, train);
  const Eigen::MatrixXd y_val = gather_targets(sessions, val);
  const Eigen::Index J = y_train.cols();
  if (spec_.standardize_targets) {
    target_mean_ = y_train.colwise().mean();
    const Eigen::RowVectorXd var =
        (y_train.rowwise() - target_mean_).array().square().colwise().mean().matrix();
    target_scale_ = safe_scale(var.cwiseSqrt(), target_mean_);
  } else {
    target_mean_ = Eigen::RowVectorXd::Zero(J);
    target_scale_ = Eigen::RowVectorXd::Ones(J);
  }
  const auto to_z = [&](const Eigen::MatrixXd& y) {
    Eigen::MatrixXd z = y.rowwise() - target_mean_;
    z.array().rowwise() /= target_scale_.array();
    return z;
  };

  const std::uint64_t seed = spec_.train.seed;
  neural::TrainConfig tc = spec_.train;
  tc.seed = derive_seed(seed, "batches");
  ridge_.reset();
  log_ = {};
  if (spec_.kind == ModelKind::kRidge) {
    ridge_ = neural::ridge_fit(assemble_flat(feats, sessions, train), to_z(y_train),
                               assemble_flat(feats, sessions, val), to_z(y_val), spec_.ridge_grid);
    net_ = {};
  } else if (is_sequence_model()) {
    neural::TrrShape shape = spec_.trr;
    shape.dropout = spec_.train.dropout;
    net_ = neural::build_trr(transform_.window_dim(), J, derive_seed(seed, "init"), shape);
    log_ = neural::train(net_, {assemble_sequence(feats, sessions, train), to_z(y_train)},
                         {assemble_sequence(feats, sessions, val), to_z(y_val)}, tc);
  } else {
    const Eigen::Index dim = transform_.window_dim() * static_cast<Eigen::Index>(spec_.features.cmts.seq_len);
    net_ = neural::build_mlp(dim, J, derive_seed(seed, "init"), spec_.mlp_hidden);
    log_ = neural::train(net_, {{assemble_flat(feats, sessions, train)}, to_z(y_train)},
                         {{assemble_flat(feats, sessions, val)}, to_z(y_val)}, tc);
  }
  fitted_ = true;
}

Eigen::MatrixXd TrainedModel::regress(const std::vector<Eigen::MatrixXd>& seq, const Eigen::MatrixXd& flat) const {
  Eigen::MatrixXd z;
  if (ridge_) {
    z = ridge_->predict(flat);
  } else if (is_sequence_model()) {
    z = neural::predict_batched(net_, seq);
  } else {
    z = neural::predict_batched(net_, {flat});
  }
  z.array().rowwise() *= target_scale_.array();
  z.rowwise() += target_mean_;
  return z;
}

Eigen::MatrixXd TrainedModel::predict(std::span<const PreparedSession> sessions,
                                      std::span<const SampleRef> samples) const {
  if (!fitted_) throw Error(ErrorKind::kInvalidInput, "model is not trained");
  if (samples.empty()) return Eigen::MatrixXd(0, target_mean_.size());
  std::set<std::size_t> used;
  for (const auto& r : samples) used.insert(r.session);
  std::vector<Eigen::MatrixXd> feats(sessions.size());
  for (std::size_t s : used) {
    if (sessions[s].seq_len != spec_.features.cmts.seq_len) {
      throw Error(ErrorKind::kShapeMismatch, "session prepared with a different sequence length");
    }
    feats[s] = transform_.window_features(sessions[s]);
  }
  if (is_sequence_model()) return regress(assemble_sequence(feats, sessions, samples), {});
  return regress({}, assemble_flat(feats, sessions, samples));
}

Eigen::MatrixXd TrainedModel::predict_session(const data::Session& s) const {
  const PreparedSession p = prepare_session(s, spec_.features);
  const std::vector<PreparedSession> one{p};
  const auto refs = all_samples(one);
  return predict(one, refs);
}

Eigen::MatrixXd TrainedModel::extract_features(const EmgRecording& context,
                                               std::span<const signal::SosCascade> filters) const {
  return transform_.context_features(context, filters);
}

Eigen::RowVectorXd TrainedModel::infer(const Eigen::MatrixXd& features) const {
  if (!fitted_) throw Error(ErrorKind::kInvalidInput, "model is not trained");
  if (features.rows() != static_cast<Eigen::Index>(spec_.features.cmts.seq_len) ||
      features.cols() != transform_.window_dim()) {
    throw Error(ErrorKind::kShapeMismatch, "feature matrix does not match the model's pipeline");
  }
  if (is_sequence_model()) {
    std::vector<Eigen::MatrixXd> seq;
    seq.reserve(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index t = 0; t < features.rows(); ++t) seq.push_back(features.row(t));
    return regress(seq, {});
  }
  Eigen::MatrixXd flat(1, features.size());
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    flat.row(0).segment(t * features.cols(), features.cols()) = features.row(t);
  }
  return regress({}, flat);
}

nlohmann::json TrainedModel::summary() const {
  nlohmann::json j{{"kind", std::string(to_string(spec_.kind))}};
  if (ridge_) {
    j["lambda"] = ridge_->lambda;
  } else {
    j["best_epoch"] = log_.best_epoch;
    j["epochs"] = log_.epochs.size();
    j["best_val_loss"] = log_.best_val_loss;
    j["early_stopped"] = log_.early_stopped;
  }
  j["reference_converged"] = transform_.reference_converged();
  return j;
}

void TrainedModel::save(const std::filesystem::path& path) const {
  if (!fitted_) throw Error(ErrorKind::kInvalidInput, "cannot save an untrained model");
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
  for (std::size_t b = 0; b < transform_.references().size(); ++b) {
    tensors.emplace_back("reference." + std::to_string(b), transform_.references().refs()[b].matrix());
  }
  tensors.emplace_back("feature.mean", transform_.mean());
  tensors.emplace_back("feature.scale", transform_.scale());
  tensors.emplace_back("target.mean", target_mean_);
  tensors.emplace_back("target.scale", target_scale_);
  if (ridge_) {
    tensors.emplace_back("ridge.coef", ridge_->coef);
    tensors.emplace_back("ridge.intercept", ridge_->intercept);
  } else {
    const auto params = net_.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) tensors.emplace_back("param." + std::to_string(i), *params[i]);
  }

  nlohmann::json meta;
  meta["version"] = std::string(version_string());
  meta["spec"] = spec_.to_json();
  meta["architecture"] = ridge_ ? nlohmann::json::array() : architecture_json(net_);
  meta["parameter_count"] = ridge_ ? static_cast<std::size_t>(ridge_->coef.size() + ridge_->intercept.size())
                                   : net_.parameter_count();
  meta["training_log"] = log_json(log_);
  meta["run_config"] = run_config;
  meta["joint_names"] = joint_names_;
  meta["fs"] = fs_;
  meta["reference_converged"] = transform_.reference_converged();
  if (ridge_) {
    meta["ridge"] = {{"lambda", ridge_->lambda}, {"grid", ridge_->lambda_grid}, {"val_nmse", ridge_->val_nmse}};
  }
  auto names = nlohmann::json::array();
  for (const auto& t : tensors) names.push_back(t.first);
  meta["tensors"] = names;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const std::string js = meta.dump();
  out.write(kModelMagic, sizeof kModelMagic);
  write_u32(out, kModelVersion);
  write_u64(out, js.size());
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) write_tensor(out, name, m);
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const auto fail = [&](const std::string& msg) -> void {
    throw Error(ErrorKind::kValidation, path.string() + ": " + msg);
  };
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) fail("not a model artifact (bad magic)");
  const std::uint32_t version = read_u32(in);
  if (version != kModelVersion) fail("unsupported artifact version " + std::to_string(version));
  const std::uint64_t js_len = read_u64(in);
  if (!in || js_len > (1ull << 32)) fail("corrupt metadata length");
  std::string js(js_len, '\0');
  in.read(js.data(), static_cast<std::streamsize>(js_len));
  if (!in) fail("truncated metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("metadata: ") + e.what());
  }

  std::map<std::string, Eigen::MatrixXd> tensors;
  const std::uint32_t n = read_u32(in);
  for (std::uint32_t i = 0; i < n && in; ++i) {
    const std::uint32_t name_len = read_u32(in);
    if (!in || name_len > 4096) fail("corrupt tensor header");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) fail("truncated tensor '" + name + "'");
    tensors[name] = m;
  }
  if (!in) fail("truncated tensor table");
  const auto tensor = [&](const std::string& name) -> const Eigen::MatrixXd& {
    const auto it = tensors.find(name);
    if (it == tensors.end()) fail("missing tensor '" + name + "'");
    return it->second;
  };

  try {
    TrainedModel m(ModelSpec::from_json(meta.at("spec")));
    m.run_config = meta.at("run_config");
    m.joint_names_ = meta.at("joint_names").get<std::vector<std::string>>();
    m.fs_ = meta.at("fs").get<double>();
    m.log_ = log_from_json(meta.at("training_log"));
    std::vector<riemann::SpdMatrix> refs;
    if (m.spec_.features.kind == FeatureKind::kCmts) {
      for (std::size_t b = 0; b < m.spec_.features.cmts.bands.size(); ++b) {
        refs.emplace_back(tensor("reference." + std::to_string(b)));
      }
    }
    m.transform_ = FeatureTransform(m.spec_.features, riemann::ReferenceSet(std::move(refs)),
                                    tensor("feature.mean"), tensor("feature.scale"));
    m.target_mean_ = tensor("target.mean");
    m.target_scale_ = tensor("target.scale");
    if (m.spec_.kind == ModelKind::kRidge) {
      neural::RidgeModel r;
      r.coef = tensor("ridge.coef");
      r.intercept = tensor("ridge.intercept");
      r.lambda = meta.at("ridge").at("lambda").get<double>();
      r.lambda_grid = meta.at("ridge").at("grid").get<std::vector<double>>();
      r.val_nmse = meta.at("ridge").at("val_nmse").get<std::vector<double>>();
      m.ridge_ = std::move(r);
    } else {
      m.net_ = network_from_json(meta.at("architecture"));
      std::vector<Eigen::MatrixXd> weights;
      for (std::size_t i = 0; i < m.net_.parameters().size(); ++i) weights.push_back(tensor("param." + std::to_string(i)));
      m.net_.restore(weights);
    }
    m.fitted_ = true;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kValidation, path.string() + ": metadata: " + e.what());
  }
}

std::unique_ptr<Estimator> PipelineBuilder::create(std::uint64_t seed) const {
  ModelSpec s = spec_;
  s.train.seed = seed;
  return std::make_unique<TrainedModel>(std::move(s));
}

}  // namespace emgkin
