#include "emgkin/pipeline.hpp"

#include "emgkin/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace emgkin {

namespace {

nlohmann::json shrinkage_json(const riemann::Shrinkage& s) {
  if (std::holds_alternative<riemann::NoShrinkage>(s)) return "none";
  if (std::holds_alternative<riemann::LedoitWolf>(s)) return "ledoit-wolf";
  return std::get<riemann::FixedShrinkage>(s).alpha;
}

riemann::Shrinkage shrinkage_from_json(const nlohmann::json& j) {
  if (j.is_number()) return riemann::FixedShrinkage{j.get<double>()};
  const auto s = j.get<std::string>();
  if (s == "none") return riemann::NoShrinkage{};
  if (s == "ledoit-wolf") return riemann::LedoitWolf{};
  throw Error(ErrorKind::kInvalidInput, "unknown shrinkage '" + s + "'");
}

}  // namespace

nlohmann::json FeatureConfig::to_json() const {
  nlohmann::json j;
  j["kind"] = kind == FeatureKind::kCmts ? "cmts" : "tdf";
  auto bands = nlohmann::json::array();
  for (const auto& b : cmts.bands) bands.push_back({b.low_hz, b.high_hz});
  j["bands"] = bands;
  j["seq_len"] = cmts.seq_len;
  j["win_ms"] = cmts.win_ms;
  j["step_ms"] = cmts.step_ms;
  j["shrinkage"] = shrinkage_json(cmts.shrinkage);
  j["prefilter"] = {cmts.prefilter.low_hz, cmts.prefilter.high_hz};
  j["reference"] = reference == ReferenceKind::kGeometric ? "geometric" : "arithmetic";
  j["tdf_ssc"] = tdf.ssc;
  j["tdf_wamp"] = tdf.wamp;
  return j;
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  FeatureConfig c;
  c.kind = j.at("kind").get<std::string>() == "tdf" ? FeatureKind::kTdf : FeatureKind::kCmts;
  c.cmts.bands.clear();
  for (const auto& b : j.at("bands")) c.cmts.bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  c.cmts.seq_len = j.at("seq_len").get<std::size_t>();
  c.cmts.win_ms = j.at("win_ms").get<double>();
  c.cmts.step_ms = j.at("step_ms").get<double>();
  c.cmts.shrinkage = shrinkage_from_json(j.at("shrinkage"));
  c.cmts.prefilter = {j.at("prefilter").at(0).get<double>(), j.at("prefilter").at(1).get<double>()};
  c.reference = j.at("reference").get<std::string>() == "arithmetic" ? ReferenceKind::kArithmetic
                                                                     : ReferenceKind::kGeometric;
  c.tdf.ssc = j.at("tdf_ssc").get<double>();
  c.tdf.wamp = j.at("tdf_wamp").get<double>();
  return c;
}

Eigen::Index PreparedSession::target_index(std::size_t i) const {
  return static_cast<Eigen::Index>(windows[i + seq_len - 1].end) - 1;
}

signal::IndexRange PreparedSession::context(std::size_t i) const {
  return {windows[i].begin, windows[i + seq_len - 1].end};
}

std::size_t sample_count(std::size_t n_samples, double fs, const riemann::CmtsConfig& cfg) {
  const auto n_win = signal::sliding_windows(cfg.win_ms, cfg.step_ms, n_samples, fs).size();
  return n_win >= cfg.seq_len ? n_win - cfg.seq_len + 1 : 0;
}

PreparedSession prepare_session(const data::Session& s, const FeatureConfig& cfg) {
  data::validate(s);
  if (cfg.cmts.seq_len == 0) throw Error(ErrorKind::kInvalidInput, "sequence length must be >= 1");
  PreparedSession p;
  p.subject_id = s.subject_id;
  p.fs = s.emg.fs;
  p.n_channels = s.emg.n_channels();
  p.seq_len = cfg.cmts.seq_len;
  p.joint_names = s.kin.joint_names;
  p.windows = signal::sliding_windows(cfg.cmts.win_ms, cfg.cmts.step_ms,
                                      static_cast<std::size_t>(s.emg.n_samples()), s.emg.fs);
  if (p.windows.size() < p.seq_len) {
    throw Error(ErrorKind::kInsufficientData,
                "session " + s.subject_id + " is shorter than one " +
                    std::to_string(cfg.cmts.context_ms()) + " ms feature context");
  }
  const std::size_t n_samples = p.windows.size() - p.seq_len + 1;
  p.targets.resize(static_cast<Eigen::Index>(n_samples), s.kin.n_joints());
  for (std::size_t i = 0; i < n_samples; ++i) {
    p.targets.row(static_cast<Eigen::Index>(i)) = s.kin.angles.col(p.target_index(i)).transpose();
  }

  if (cfg.kind == FeatureKind::kCmts) {
    const auto filters = riemann::band_filters(cfg.cmts, s.emg.fs);
    for (const auto& f : filters) {
      Eigen::MatrixXd x = s.emg.data;
      if (!f.empty()) signal::apply_rows(x, f, signal::Phase::kZero);
      std::vector<riemann::SpdMatrix> covs;
      covs.reserve(p.windows.size());
      for (const auto& w : p.windows) {
        covs.push_back(riemann::covariance(
            x.middleCols(static_cast<Eigen::Index>(w.begin), static_cast<Eigen::Index>(w.end - w.begin)),
            cfg.cmts.shrinkage));
      }
      p.covariances.push_back(std::move(covs));
    }
  } else {
    p.tdf.resize(static_cast<Eigen::Index>(p.windows.size()), neural::kTdfPerChannel * p.n_channels);
    for (std::size_t k = 0; k < p.windows.size(); ++k) {
      const auto& w = p.windows[k];
      p.tdf.row(static_cast<Eigen::Index>(k)) =
          neural::tdf_features(s.emg.data.middleCols(static_cast<Eigen::Index>(w.begin),
                                                     static_cast<Eigen::Index>(w.end - w.begin)),
                               cfg.tdf)
              .transpose();
    }
  }
  return p;
}

std::vector<SampleRef> all_samples(std::span<const PreparedSession> sessions) {
  std::vector<SampleRef> out;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    for (std::size_t i = 0; i < sessions[s].n_samples(); ++i) out.push_back({s, i});
  }
  return out;
}

FeatureTransform::FeatureTransform(FeatureConfig cfg, riemann::ReferenceSet refs,
                                   Eigen::RowVectorXd mean, Eigen::RowVectorXd scale)
    : cfg_(std::move(cfg)), refs_(std::move(refs)), mean_(std::move(mean)), scale_(std::move(scale)) {}

FeatureTransform FeatureTransform::fit(const FeatureConfig& cfg, std::span<const PreparedSession> sessions,
                                       std::span<const SampleRef> train, bool standardize) {
  if (train.empty()) throw Error(ErrorKind::kInvalidInput, "cannot fit features on an empty training set");
  // Windows touched by the training samples, per session.
  std::vector<std::vector<char>> used(sessions.size());
  for (std::size_t s = 0; s < sessions.size(); ++s) used[s].assign(sessions[s].n_windows(), 0);
  for (const auto& r : train) {
    for (std::size_t k = 0; k < sessions[r.session].seq_len; ++k) used[r.session][r.sample + k] = 1;
  }

  FeatureTransform t;
  t.cfg_ = cfg;
  if (cfg.kind == FeatureKind::kCmts) {
    std::vector<riemann::SpdMatrix> refs;
    for (std::size_t b = 0; b < cfg.cmts.bands.size(); ++b) {
      std::vector<riemann::SpdMatrix> pool;
      for (std::size_t s = 0; s < sessions.size(); ++s) {
        if (sessions[s].covariances.size() != cfg.cmts.bands.size()) {
          throw Error(ErrorKind::kShapeMismatch, "session was prepared with a different band set");
        }
        for (std::size_t k = 0; k < used[s].size(); ++k) {
          if (used[s][k]) pool.push_back(sessions[s].covariances[b][k]);
        }
      }
      if (cfg.reference == ReferenceKind::kGeometric) {
        auto m = riemann::geometric_mean(pool);
        t.converged_ = t.converged_ && m.converged;
        refs.push_back(std::move(m.mean));
      } else {
        refs.push_back(riemann::arithmetic_mean(pool));
      }
    }
    t.refs_ = riemann::ReferenceSet(std::move(refs));
  }

  // Standardisation statistics over the same windows.
  Eigen::RowVectorXd sum, sq;
  double count = 0.0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const Eigen::MatrixXd f = t.raw_window_features(sessions[s]);
    if (sum.size() == 0) {
      sum = Eigen::RowVectorXd::Zero(f.cols());
      sq = Eigen::RowVectorXd::Zero(f.cols());
    }
    for (std::size_t k = 0; k < used[s].size(); ++k) {
      if (!used[s][k]) continue;
      const auto row = f.row(static_cast<Eigen::Index>(k));
      sum += row;
      sq += row.cwiseProduct(row);
      count += 1.0;
    }
  }
  const Eigen::Index dim = sum.size();
  if (standardize) {
    t.mean_ = sum / count;
    const Eigen::RowVectorXd var = (sq / count - t.mean_.cwiseProduct(t.mean_)).cwiseMax(0.0);
    t.scale_ = var.cwiseSqrt();
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (!(t.scale_(c) > 1e-12 * std::max(1.0, std::abs(t.mean_(c))))) t.scale_(c) = 1.0;
    }
  } else {
    t.mean_ = Eigen::RowVectorXd::Zero(dim);
    t.scale_ = Eigen::RowVectorXd::Ones(dim);
  }
  return t;
}

Eigen::MatrixXd FeatureTransform::raw_window_features(const PreparedSession& s) const {
  if (cfg_.kind == FeatureKind::kTdf) {
    if (s.tdf.rows() != static_cast<Eigen::Index>(s.n_windows())) {
      throw Error(ErrorKind::kShapeMismatch, "session was not prepared for TDF features");
    }
    return s.tdf;
  }
  if (s.covariances.size() != refs_.size()) {
    throw Error(ErrorKind::kShapeMismatch, "session band count does not match the feature references");
  }
  const Eigen::Index td = riemann::tangent_dim(s.n_channels);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s.n_windows()), td * static_cast<Eigen::Index>(refs_.size()));
  for (std::size_t b = 0; b < refs_.size(); ++b) {
    if (refs_.refs()[b].dim() != s.n_channels) {
      throw Error(ErrorKind::kShapeMismatch, "reference dimension does not match channel count");
    }
    for (std::size_t k = 0; k < s.n_windows(); ++k) {
      out.row(static_cast<Eigen::Index>(k)).segment(static_cast<Eigen::Index>(b) * td, td) =
          riemann::tangent_project_whitened(s.covariances[b][k], refs_.inv_sqrt(b)).transpose();
    }
  }
  return out;
}

Eigen::MatrixXd FeatureTransform::window_features(const PreparedSession& s) const {
  Eigen::MatrixXd f = raw_window_features(s);
  if (f.cols() != mean_.size()) throw Error(ErrorKind::kShapeMismatch, "feature width does not match the fit");
  f.rowwise() -= mean_;
  f.array().rowwise() /= scale_.array();
  return f;
}

std::vector<signal::SosCascade> FeatureTransform::filters(double fs) const {
  if (cfg_.kind == FeatureKind::kTdf) return {};
  return riemann::band_filters(cfg_.cmts, fs);
}

Eigen::MatrixXd FeatureTransform::context_features(const EmgRecording& rec,
                                                   std::span<const signal::SosCascade> filters) const {
  Eigen::MatrixXd f;
  if (cfg_.kind == FeatureKind::kCmts) {
    f = riemann::extract_cmts_sequence(rec, cfg_.cmts, refs_, filters);
  } else {
    const std::size_t ctx = signal::ms_to_samples(cfg_.cmts.context_ms(), rec.fs);
    const std::size_t win = signal::ms_to_samples(cfg_.cmts.win_ms, rec.fs);
    const std::size_t step = signal::ms_to_samples(cfg_.cmts.step_ms, rec.fs);
    if (static_cast<std::size_t>(rec.n_samples()) < ctx) {
      throw Error(ErrorKind::kInsufficientData,
                  "feature extraction needs " + std::to_string(cfg_.cmts.context_ms()) + " ms of context (" +
                      std::to_string(ctx) + " samples), got " + std::to_string(rec.n_samples()));
    }
    const Eigen::Index start = rec.n_samples() - static_cast<Eigen::Index>(ctx);
    f.resize(static_cast<Eigen::Index>(cfg_.cmts.seq_len), neural::kTdfPerChannel * rec.n_channels());
    for (std::size_t k = 0; k < cfg_.cmts.seq_len; ++k) {
      f.row(static_cast<Eigen::Index>(k)) =
          neural::tdf_features(rec.data.middleCols(start + static_cast<Eigen::Index>(k * step),
                                                   static_cast<Eigen::Index>(win)),
                               cfg_.tdf)
              .transpose();
    }
  }
  if (f.cols() != mean_.size()) throw Error(ErrorKind::kShapeMismatch, "feature width does not match the fit");
  f.rowwise() -= mean_;
  f.array().rowwise() /= scale_.array();
  return f;
}

std::vector<Eigen::MatrixXd> assemble_sequence(std::span<const Eigen::MatrixXd> window_features,
                                               std::span<const PreparedSession> sessions,
                                               std::span<const SampleRef> refs) {
  if (refs.empty()) return {};
  const std::size_t len = sessions[refs.front().session].seq_len;
  const Eigen::Index dim = window_features[refs.front().session].cols();
  const auto n = static_cast<Eigen::Index>(refs.size());
  std::vector<Eigen::MatrixXd> out(len, Eigen::MatrixXd(n, dim));
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& r = refs[static_cast<std::size_t>(b)];
    const auto& w = window_features[r.session];
    for (std::size_t t = 0; t < len; ++t) {
      out[t].row(b) = w.row(static_cast<Eigen::Index>(r.sample + t));
    }
  }
  return out;
}

Eigen::MatrixXd assemble_flat(std::span<const Eigen::MatrixXd> window_features,
                              std::span<const PreparedSession> sessions,
                              std::span<const SampleRef> refs) {
  if (refs.empty()) return {};
  const std::size_t len = sessions[refs.front().session].seq_len;
  const Eigen::Index dim = window_features[refs.front().session].cols();
  const auto n = static_cast<Eigen::Index>(refs.size());
  Eigen::MatrixXd out(n, dim * static_cast<Eigen::Index>(len));
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& r = refs[static_cast<std::size_t>(b)];
    const auto& w = window_features[r.session];
    for (std::size_t t = 0; t < len; ++t) {
      out.row(b).segment(static_cast<Eigen::Index>(t) * dim, dim) = w.row(static_cast<Eigen::Index>(r.sample + t));
    }
  }
  return out;
}

Eigen::MatrixXd gather_targets(std::span<const PreparedSession> sessions, std::span<const SampleRef> refs) {
  if (refs.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(refs.size()), sessions[refs.front().session].targets.cols());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        sessions[refs[i].session].targets.row(static_cast<Eigen::Index>(refs[i].sample));
  }
  return out;
}

}  // namespace emgkin
