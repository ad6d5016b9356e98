#include "commands.hpp"

#include "tables.hpp"

#include "emgkin/data.hpp"
#include "emgkin/error.hpp"
#include "emgkin/eval.hpp"
#include "emgkin/model.hpp"
#include "emgkin/sync.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

namespace emgkin::cli {

namespace {

void stamp(data::Session& s, const RunConfig& cfg) {
  s.attributes["run_config"] = cfg.to_json().dump();
  s.attributes["version"] = std::string(version_string());
}

data::Session load(const fs::path& dir) {
  if (!fs::exists(dir)) throw Error(ErrorKind::kIo, "session not found: " + dir.string());
  return data::load_session(dir);
}

std::vector<data::Session> load_all(const std::vector<fs::path>& dirs) {
  std::vector<data::Session> out;
  for (const auto& d : dirs) out.push_back(load(d));
  return out;
}

void print_sync(const char* label, const sync::SyncResult& r) {
  std::printf("%soffset_ms=%.1f offset_samples=%lld peak_r=%.4f\n", label, r.offset_ms,
              static_cast<long long>(r.offset_samples), r.peak_correlation);
}

void write_curve(const fs::path& path, const RunConfig& cfg, const std::vector<const sync::SyncResult*>& parts) {
  CsvWriter csv(path, cfg, {"part", "shift_ms", "correlation"});
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (const auto& [ms, r] : parts[p]->curve) {
      csv.cell(static_cast<double>(p)).cell(ms).cell(r);
      csv.end_row();
    }
  }
}

// Contiguous validation tail per session, separated from training by enough
// samples that no window is shared.
void split_train_val(const std::vector<PreparedSession>& ps, const RunConfig& cfg, std::vector<SampleRef>& train,
                     std::vector<SampleRef>& val) {
  const auto& c = cfg.model.features.cmts;
  const auto gap = c.seq_len + static_cast<std::size_t>(std::ceil(c.win_ms / c.step_ms));
  for (std::size_t s = 0; s < ps.size(); ++s) {
    const std::size_t n = ps[s].n_samples();
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.cv.val_fraction * n)));
    if (n < n_val + gap + 1) {
      throw Error(ErrorKind::kInsufficientData, "session " + ps[s].subject_id + " has only " + std::to_string(n) +
                                                    " samples, too few to hold out a validation segment");
    }
    for (std::size_t i = 0; i + n_val + gap < n; ++i) train.push_back({s, i});
    for (std::size_t i = n - n_val; i < n; ++i) val.push_back({s, i});
  }
}

void write_report(const fs::path& dir, const RunConfig& cfg, eval::EvalReport r) {
  r.config["run_config"] = cfg.to_json();
  write_json(dir / "report.json", r.to_json());
  {
    CsvWriter csv(dir / "folds.csv", cfg,
                  {"subject", "fold", "validation_subject", "n_train", "n_val", "n_test", "n_guarded", "seed", "nmse",
                   "abs_error_deg"});
    for (const auto& f : r.folds) {
      csv.cell(f.test_subject).cell(static_cast<double>(f.fold)).cell(f.validation_subject);
      csv.cell(static_cast<double>(f.n_train)).cell(static_cast<double>(f.n_val)).cell(static_cast<double>(f.n_test));
      csv.cell(static_cast<double>(f.n_guarded)).cell(std::to_string(f.seed)).cell(f.nmse.mean).cell(f.abs_error.mean);
      csv.end_row();
    }
  }
  {
    CsvWriter csv(dir / "joints.csv", cfg, {"subject", "joint", "nmse", "abs_error_deg"});
    for (const auto& s : r.subjects) {
      for (std::size_t j = 0; j < r.joint_names.size(); ++j) {
        const auto idx = static_cast<Eigen::Index>(j);
        csv.cell(s.subject).cell(r.joint_names[j]).cell(s.nmse.per_joint(idx)).cell(s.abs_error.per_joint(idx));
        csv.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "fingers.csv", cfg, {"subject", "finger", "nmse", "abs_error_deg"});
    for (const auto& s : r.subjects) {
      for (const auto& f : s.fingers) {
        csv.cell(s.subject).cell(f.finger).cell(f.nmse).cell(f.abs_error);
        csv.end_row();
      }
    }
    for (const auto& f : r.fingers) {
      csv.cell("all").cell(f.finger).cell(f.nmse).cell(f.abs_error);
      csv.end_row();
    }
  }
  {
    std::vector<std::string> header{"row"};
    for (const auto& j : r.joint_names) header.push_back("true_" + j);
    for (const auto& j : r.joint_names) header.push_back("pred_" + j);
    CsvWriter csv(dir / "predictions.csv", cfg, header);
    for (Eigen::Index i = 0; i < r.truth.rows(); ++i) {
      csv.cell(static_cast<double>(i));
      for (Eigen::Index j = 0; j < r.truth.cols(); ++j) csv.cell(r.truth(i, j));
      for (Eigen::Index j = 0; j < r.predictions.cols(); ++j) csv.cell(r.predictions(i, j));
      csv.end_row();
    }
  }
}

eval::EvalReport intra_all(const std::vector<data::Session>& sessions, const ModelSpec& spec, const RunConfig& cfg) {
  std::vector<eval::EvalReport> reports;
  for (const auto& s : sessions) reports.push_back(eval::intra_subject_cv(s, PipelineBuilder(spec), cfg.cv));
  return reports.size() == 1 ? reports.front() : eval::combine(reports);
}

struct AblationRow {
  std::string label;
  double x = 0.0;
  double nmse = 0.0;
  double abs_error = 0.0;
};

std::string band_list(const std::vector<BandSpec>& bands) {
  std::string out;
  for (const auto& b : bands) {
    if (!out.empty()) out += ";";
    out += format_number(b.low_hz) + "-" + format_number(b.high_hz);
  }
  return out;
}

}  // namespace

void run_synth(const RunConfig& cfg, const SynthArgs& a) {
  data::SynthConfig c;
  c.seed = a.seed ? *a.seed : cfg.synth_seed();
  c.duration_s = a.duration_s;
  c.sync_shift_ms = a.shift_ms;
  if (a.subjects < 1) throw Error(ErrorKind::kInvalidInput, "--subjects must be >= 1");
  if (a.subjects == 1) {
    data::Session s = data::generate_synthetic(c);
    stamp(s, cfg);
    data::save_session(s, a.out);
    std::printf("wrote %s subject=%s samples=%lld fs=%g seed=%llu\n", a.out.c_str(), s.subject_id.c_str(),
                static_cast<long long>(s.emg.data.cols()), s.emg.fs, static_cast<unsigned long long>(c.seed));
    return;
  }
  auto pop = data::generate_population(c, a.subjects);
  for (auto& s : pop) {
    stamp(s, cfg);
    const fs::path dir = a.out / s.subject_id;
    data::save_session(s, dir);
    std::printf("wrote %s subject=%s samples=%lld\n", dir.c_str(), s.subject_id.c_str(),
                static_cast<long long>(s.emg.data.cols()));
  }
}

void run_import(const RunConfig& cfg, const ImportArgs& a) {
  if (!fs::exists(a.archive)) throw Error(ErrorKind::kIo, "archive not found: " + a.archive.string());
  auto sessions = data::import_emgfk(a.archive);
  std::map<std::string, int> seen;
  for (auto& s : sessions) {
    const int k = seen[s.subject_id]++;
    const std::string name = k == 0 ? s.subject_id : s.subject_id + "_" + std::to_string(k);
    stamp(s, cfg);
    data::save_session(s, a.out / name);
    std::printf("wrote %s samples=%lld\n", (a.out / name).c_str(), static_cast<long long>(s.emg.data.cols()));
  }
}

void run_sync(const RunConfig& cfg, const SyncArgs& a) {
  if (a.whole && a.halves) throw Error(ErrorKind::kInvalidInput, "--whole and --halves are exclusive");
  const data::Session s = load(a.session);
  if (s.sync_applied) throw Error(ErrorKind::kValidation, "session is already synchronised");
  // Real recordings drift between the two halves; synthetic ones carry one shift.
  const bool halves = a.halves || (!a.whole && s.provenance.kind == data::Provenance::Kind::kReal);

  nlohmann::json out{{"session", a.session.string()}, {"run_config", cfg.to_json()}};
  data::Session synced;
  if (halves) {
    const sync::HalfSync h = sync::find_offset_halves(s, cfg.sync);
    print_sync("half=1 ", h.first);
    print_sync("half=2 ", h.second);
    out["mode"] = "halves";
    out["split"] = h.split;
    out["first"] = h.first.to_json();
    out["second"] = h.second.to_json();
    if (!a.out.empty()) write_curve(a.out / "curve.csv", cfg, {&h.first, &h.second});
    if (!a.apply.empty() || a.sweep) synced = sync::apply_sync(s, h);
  } else {
    const sync::SyncResult r = sync::find_offset(s.emg, s.kin, cfg.sync);
    print_sync("", r);
    out["mode"] = "whole";
    out["result"] = r.to_json();
    if (!a.out.empty()) write_curve(a.out / "curve.csv", cfg, {&r});
    if (!a.apply.empty() || a.sweep) synced = sync::apply_sync(s, r);
  }

  if (!a.apply.empty()) {
    stamp(synced, cfg);
    data::save_session(synced, a.apply);
    std::printf("wrote %s\n", a.apply.c_str());
  }
  if (a.sweep) {
    const auto rows = sync::offset_sweep_eval(synced, a.offsets, PipelineBuilder(cfg.model), cfg.cv);
    nlohmann::json sweep = nlohmann::json::array();
    std::printf("%12s %10s %14s\n", "offset_ms", "nmse", "abs_error_deg");
    for (const auto& r : rows) {
      std::printf("%12.1f %10.4f %14.3f\n", r.offset_ms, r.mean_nmse, r.mean_abs_error);
      sweep.push_back({{"offset_ms", r.offset_ms}, {"nmse", r.mean_nmse}, {"abs_error", r.mean_abs_error}});
    }
    out["sweep"] = sweep;
    if (!a.out.empty()) {
      CsvWriter csv(a.out / "sweep.csv", cfg, {"offset_ms", "nmse", "abs_error_deg"});
      for (const auto& r : rows) {
        csv.cell(r.offset_ms).cell(r.mean_nmse).cell(r.mean_abs_error);
        csv.end_row();
      }
    }
  }
  if (!a.out.empty()) write_json(a.out / "sync.json", out);
}

void run_features(const RunConfig& cfg, const FeaturesArgs& a) {
  const data::Session s = load(a.session);
  const auto& fc = cfg.model.features;
  const std::vector<PreparedSession> ps{prepare_session(s, fc)};
  const auto samples = all_samples(ps);
  const auto transform = FeatureTransform::fit(fc, ps, samples, cfg.model.standardize_features);
  const Eigen::MatrixXd w = transform.window_features(ps.front());
  fs::create_directories(a.out);
  data::write_matrix_file(a.out / "windows.bin", w);
  data::write_matrix_file(a.out / "targets.bin", ps.front().targets);
  {
    CsvWriter csv(a.out / "windows.csv", cfg, {"window", "begin", "end"});
    for (std::size_t i = 0; i < ps.front().windows.size(); ++i) {
      csv.cell(static_cast<double>(i)).cell(static_cast<double>(ps.front().windows[i].begin));
      csv.cell(static_cast<double>(ps.front().windows[i].end));
      csv.end_row();
    }
  }
  write_json(a.out / "features.json", {{"windows", w.rows()},
                                       {"window_dim", w.cols()},
                                       {"seq_len", fc.cmts.seq_len},
                                       {"samples", ps.front().n_samples()},
                                       {"features", fc.to_json()},
                                       {"reference_converged", transform.reference_converged()},
                                       {"run_config", cfg.to_json()}});
  std::printf("wrote %s windows=%lld window_dim=%lld samples=%zu\n", a.out.c_str(), static_cast<long long>(w.rows()),
              static_cast<long long>(w.cols()), ps.front().n_samples());
}

void run_train(const RunConfig& cfg, const TrainArgs& a) {
  const auto sessions = load_all(a.sessions);
  std::vector<PreparedSession> ps;
  for (const auto& s : sessions) ps.push_back(prepare_session(s, cfg.model.features));
  std::vector<SampleRef> train, val;
  split_train_val(ps, cfg, train, val);

  TrainedModel m(cfg.model);
  m.run_config = cfg.to_json();
  m.fit(ps, train, val);
  m.save(a.out);

  fs::path log_path = a.out;
  log_path += ".log.csv";
  CsvWriter csv(log_path, cfg, {"epoch", "train_loss", "val_loss"});
  for (const auto& e : m.log().epochs) {
    csv.cell(static_cast<double>(e.epoch)).cell(e.train_loss).cell(e.val_loss);
    csv.end_row();
  }
  std::printf("wrote %s train=%zu val=%zu summary=%s\n", a.out.c_str(), train.size(), val.size(),
              m.summary().dump().c_str());
}

void run_predict(const RunConfig& cfg, const PredictArgs& a) {
  if (!fs::exists(a.model)) throw Error(ErrorKind::kIo, "model not found: " + a.model.string());
  const TrainedModel m = TrainedModel::load(a.model);
  const data::Session s = load(a.session);
  const std::vector<PreparedSession> ps{prepare_session(s, m.spec().features)};
  const Eigen::MatrixXd pred = m.predict(ps, all_samples(ps));

  std::vector<std::string> header{"time_s"};
  for (const auto& j : m.joint_names()) header.push_back(j);
  CsvWriter csv(a.out, cfg, header);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    csv.cell(static_cast<double>(ps.front().target_index(static_cast<std::size_t>(i))) / s.emg.fs);
    for (Eigen::Index j = 0; j < pred.cols(); ++j) csv.cell(pred(i, j));
    csv.end_row();
  }
  std::printf("wrote %s rows=%lld\n", a.out.c_str(), static_cast<long long>(pred.rows()));
}

void run_eval(const RunConfig& cfg, const EvalArgs& a) {
  const auto sessions = load_all(a.sessions);
  eval::EvalReport r;
  if (a.protocol == "intra") {
    r = intra_all(sessions, cfg.model, cfg);
  } else if (a.protocol == "loso") {
    r = eval::loso_cv(sessions, PipelineBuilder(cfg.model), cfg.cv);
  } else {
    throw Error(ErrorKind::kInvalidInput, "unknown protocol '" + a.protocol + "' (intra or loso)");
  }
  write_report(a.out, cfg, r);
  std::cout << r.summary() << '\n';
  std::printf("nmse=%.4f abs_error_deg=%.3f report=%s\n", r.mean_nmse, r.mean_abs_error,
              (a.out / "report.json").c_str());
}

void run_ablate(const RunConfig& cfg, const AblateArgs& a) {
  const auto sessions = load_all(a.sessions);
  std::vector<AblationRow> rows;
  const auto average = [&](const std::vector<std::vector<AblationRow>>& per_session) {
    for (std::size_t i = 0; i < per_session.front().size(); ++i) {
      AblationRow r = per_session.front()[i];
      r.nmse = r.abs_error = 0.0;
      for (const auto& p : per_session) {
        r.nmse += p[i].nmse / static_cast<double>(per_session.size());
        r.abs_error += p[i].abs_error / static_cast<double>(per_session.size());
      }
      rows.push_back(r);
    }
  };

  if (a.axis == "duration") {
    const std::vector<double> fractions = a.values.empty() ? std::vector<double>{0.1, 0.2, 0.4, 0.6, 0.8, 1.0} : a.values;
    std::vector<std::vector<AblationRow>> per;
    for (const auto& s : sessions) {
      auto& out = per.emplace_back();
      for (const auto& r : eval::training_duration_sweep(s, fractions, PipelineBuilder(cfg.model), cfg.cv)) {
        out.push_back({"fraction", r.x, r.mean_nmse, r.mean_abs_error});
      }
    }
    average(per);
  } else if (a.axis == "offset") {
    const std::vector<double> offsets =
        a.values.empty() ? std::vector<double>{-1000, -500, -200, 0, 200, 500, 1000} : a.values;
    std::vector<std::vector<AblationRow>> per;
    for (const auto& s : sessions) {
      auto& out = per.emplace_back();
      for (const auto& r : sync::offset_sweep_eval(s, offsets, PipelineBuilder(cfg.model), cfg.cv)) {
        out.push_back({"offset_ms", r.offset_ms, r.mean_nmse, r.mean_abs_error});
      }
    }
    average(per);
  } else if (a.axis == "seqlen") {
    const std::vector<double> lens = a.values.empty() ? std::vector<double>{1, 2, 4, 6, 8, 10} : a.values;
    for (const double l : lens) {
      if (l < 1 || l != std::floor(l)) throw Error(ErrorKind::kInvalidInput, "sequence lengths must be positive integers");
      ModelSpec spec = cfg.model;
      spec.features.cmts.seq_len = static_cast<std::size_t>(l);
      const auto r = intra_all(sessions, spec, cfg);
      rows.push_back({"seq_len", l, r.mean_nmse, r.mean_abs_error});
    }
  } else if (a.axis == "bands") {
    const std::vector<BandSpec> three = ModelSpec::defaults(ModelKind::kTrr).features.cmts.bands;
    const std::vector<BandSpec> full = ModelSpec::defaults(ModelKind::kTrrSimplified).features.cmts.bands;
    std::vector<std::pair<std::vector<BandSpec>, bool>> variants = {{three, true}, {full, true}, {full, false}};
    for (const auto& b : three) variants.push_back({{b}, true});
    for (std::size_t i = 0; i < variants.size(); ++i) {
      ModelSpec spec = cfg.model;
      spec.features.cmts.bands = variants[i].first;
      if (!variants[i].second) spec.features.cmts.shrinkage = riemann::NoShrinkage{};
      const auto r = intra_all(sessions, spec, cfg);
      rows.push_back({band_list(variants[i].first) + (variants[i].second ? "" : " no-shrinkage"),
                      static_cast<double>(i), r.mean_nmse, r.mean_abs_error});
    }
  } else {
    throw Error(ErrorKind::kInvalidInput, "unknown ablation axis '" + a.axis + "' (duration, offset, bands, seqlen)");
  }

  const fs::path csv_path = a.out / ("ablate_" + a.axis + ".csv");
  CsvWriter csv(csv_path, cfg, {"variant", "x", "nmse", "abs_error_deg"});
  nlohmann::json j = nlohmann::json::array();
  std::printf("%-28s %10s %10s %14s\n", "variant", "x", "nmse", "abs_error_deg");
  for (const auto& r : rows) {
    csv.cell(r.label).cell(r.x).cell(r.nmse).cell(r.abs_error);
    csv.end_row();
    std::printf("%-28s %10g %10.4f %14.3f\n", r.label.c_str(), r.x, r.nmse, r.abs_error);
    j.push_back({{"variant", r.label}, {"x", r.x}, {"nmse", r.nmse}, {"abs_error", r.abs_error}});
  }
  write_json(a.out / ("ablate_" + a.axis + ".json"), {{"axis", a.axis}, {"rows", j}, {"run_config", cfg.to_json()}});
}

void run_bench(const RunConfig& cfg, const BenchArgs& a) {
  if (!fs::exists(a.model)) throw Error(ErrorKind::kIo, "model not found: " + a.model.string());
  const TrainedModel m = TrainedModel::load(a.model);
  const data::Session s = load(a.session);
  const eval::TimingStats t = eval::timing_benchmark(m, s.emg, a.n);
  std::printf("%-20s %12s %10s\n", "stage", "mean_ms", "std_ms");
  std::printf("%-20s %12.3f %10.3f\n", "feature extraction", t.feature_mean_ms, t.feature_std_ms);
  std::printf("%-20s %12.3f %10.3f\n", "inference", t.inference_mean_ms, t.inference_std_ms);
  std::printf("%-20s %12.3f\n", "total", t.feature_mean_ms + t.inference_mean_ms);
  std::printf("model=%s samples=%zu\n", std::string(to_string(m.spec().kind)).c_str(), t.n);
  if (!a.out.empty()) {
    write_json(a.out, {{"model", std::string(to_string(m.spec().kind))},
                       {"n", t.n},
                       {"feature_mean_ms", t.feature_mean_ms},
                       {"feature_std_ms", t.feature_std_ms},
                       {"inference_mean_ms", t.inference_mean_ms},
                       {"inference_std_ms", t.inference_std_ms},
                       {"run_config", cfg.to_json()}});
  }
}

void run_pca(const RunConfig& cfg, const PcaArgs& a) {
  std::vector<KinematicsTrack> tracks;
  for (const auto& s : load_all(a.sessions)) tracks.push_back(s.kin);
  const eval::PcaResult r = eval::pca_explained_variance(tracks);
  if (r.degenerate) throw Error(ErrorKind::kValidation, "kinematics are constant; explained variance undefined");
  if (!a.out.empty()) {
    CsvWriter csv(a.out, cfg, {"component", "eigenvalue", "cumulative_ratio"});
    for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) {
      csv.cell(static_cast<double>(i + 1)).cell(r.eigenvalues(i)).cell(r.cumulative_ratio(i));
      csv.end_row();
    }
  }
  std::printf("components_90=%zu\n", r.components_90);
}

}  // namespace emgkin::cli
