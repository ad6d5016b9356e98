#include "emgkin/data.hpp"

#include "emgkin/error.hpp"
#include "emgkin/signal/signal.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

namespace emgkin::data {

namespace fs = std::filesystem;

EmgRecording acquisition_filter(const EmgRecording& raw) {
  EmgRecording out = signal::bandpass(raw, BandSpec{15.0, 150.0}, signal::Phase::kZero);
  return signal::notch(out, {50.0, 100.0}, signal::Phase::kZero);
}

namespace {

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;  // [n_rows x n_cols]
};

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kValidation, path.string() + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), [](char c) { return c == '\r' || c == ' '; }),
                 cell.end());
      t.header.push_back(cell);
    }
  }
  std::vector<double> values;
  std::size_t n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(cell.empty() ? std::nan("") : std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::kValidation, path.string() + ": row " + std::to_string(n_rows + 2) +
                                                ": not a number: '" + cell + "'");
      }
      ++cols;
    }
    if (cols != t.header.size()) {
      throw Error(ErrorKind::kShapeMismatch, path.string() + ": row " + std::to_string(n_rows + 2) +
                                                 " has " + std::to_string(cols) + " cells, header has " +
                                                 std::to_string(t.header.size()));
    }
    ++n_rows;
  }
  t.rows = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(t.header.size()));
  return t;
}

double median_step(const Eigen::VectorXd& time) {
  std::vector<double> d;
  for (Eigen::Index i = 1; i < time.size(); ++i) d.push_back(time(i) - time(i - 1));
  if (d.empty()) throw Error(ErrorKind::kInsufficientData, "time column has fewer than 2 rows");
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

// Linear interpolation of irregularly timed rows onto query times.
Eigen::MatrixXd interpolate_rows(const Eigen::VectorXd& t_src, const Eigen::MatrixXd& values,
                                 const Eigen::VectorXd& t_query) {
  Eigen::MatrixXd out(values.cols(), t_query.size());
  Eigen::Index k = 0;
  for (Eigen::Index q = 0; q < t_query.size(); ++q) {
    const double t = t_query(q);
    while (k + 2 < t_src.size() && t_src(k + 1) < t) ++k;
    const double span = t_src(k + 1) - t_src(k);
    const double w = span > 0.0 ? std::clamp((t - t_src(k)) / span, 0.0, 1.0) : 0.0;
    out.col(q) = ((1.0 - w) * values.row(k) + w * values.row(k + 1)).transpose();
  }
  return out;
}

// One directory per subject holding emg.csv (or emg_raw.csv, filtered on
// import) and either kinematics.csv (joint angles, degrees) or landmarks.csv
// (21 x/y/z triples). First column of every file is time in seconds.
class CsvSubjectAdapter : public ArchiveAdapter {
 public:
  std::string name() const override { return "csv-per-subject"; }

  bool detect(const fs::path& archive) const override {
    if (!fs::is_directory(archive)) return false;
    for (const auto& e : fs::directory_iterator(archive)) {
      if (e.is_directory() && has_emg(e.path()) && has_kin(e.path())) return true;
    }
    return false;
  }

  std::vector<Session> load(const fs::path& archive) const override {
    std::vector<fs::path> subjects;
    for (const auto& e : fs::directory_iterator(archive)) {
      if (e.is_directory() && has_emg(e.path()) && has_kin(e.path())) subjects.push_back(e.path());
    }
    std::sort(subjects.begin(), subjects.end());
    std::vector<Session> out;
    for (const auto& dir : subjects) out.push_back(load_subject(dir));
    return out;
  }

 private:
  static bool has_emg(const fs::path& d) {
    return fs::exists(d / "emg.csv") || fs::exists(d / "emg_raw.csv");
  }
  static bool has_kin(const fs::path& d) {
    return fs::exists(d / "kinematics.csv") || fs::exists(d / "landmarks.csv");
  }

  static Session load_subject(const fs::path& dir) {
    const bool raw = !fs::exists(dir / "emg.csv");
    const Table emg = read_csv(dir / (raw ? "emg_raw.csv" : "emg.csv"));
    if (emg.header.size() < 2 || emg.rows.rows() < 2) {
      throw Error(ErrorKind::kInsufficientData, dir.string() + ": EMG table needs a time column and data");
    }
    const Eigen::VectorXd t_emg = emg.rows.col(0);
    const double emg_fs = 1.0 / median_step(t_emg);

    Session s;
    s.subject_id = dir.filename().string();
    s.provenance.kind = Provenance::Kind::kReal;
    s.provenance.params = {{"adapter", "csv-per-subject"}, {"source", dir.string()}, {"raw_emg", raw}};
    s.emg.fs = std::round(emg_fs * 1e6) / 1e6;
    s.emg.data = emg.rows.rightCols(emg.rows.cols() - 1).transpose();
    s.emg.channel_names.assign(emg.header.begin() + 1, emg.header.end());
    if (raw) s.emg = acquisition_filter(s.emg);

    Eigen::VectorXd t_kin;
    Eigen::MatrixXd kin_rows;  // [frames x joints]
    std::vector<std::string> names;
    if (fs::exists(dir / "kinematics.csv")) {
      const Table k = read_csv(dir / "kinematics.csv");
      t_kin = k.rows.col(0);
      kin_rows = k.rows.rightCols(k.rows.cols() - 1);
      names.assign(k.header.begin() + 1, k.header.end());
    } else {
      const Table k = read_csv(dir / "landmarks.csv");
      if (k.rows.cols() != 1 + 3 * kLandmarkCount) {
        throw Error(ErrorKind::kShapeMismatch, dir.string() + "/landmarks.csv: expected time + 63 columns");
      }
      std::vector<HandFrame> frames(static_cast<std::size_t>(k.rows.rows()));
      for (Eigen::Index f = 0; f < k.rows.rows(); ++f) {
        for (int p = 0; p < kLandmarkCount; ++p) {
          frames[static_cast<std::size_t>(f)][p] = k.rows.row(f).segment(1 + 3 * p, 3).transpose();
        }
      }
      LandmarkAngles la = angles_from_landmarks(frames, 1.0 / median_step(k.rows.col(0)));
      t_kin = k.rows.col(0);
      kin_rows = la.track.angles.transpose();
      names = la.track.joint_names;
      s.attributes["landmark_frames_filled"] = std::to_string(la.filled);
    }
    if (t_kin.size() < 2) throw Error(ErrorKind::kInsufficientData, dir.string() + ": fewer than 2 kinematic frames");

    // Keep EMG samples covered by the kinematic timeline.
    Eigen::Index begin = 0;
    Eigen::Index end = t_emg.size();
    while (begin < end && t_emg(begin) < t_kin(0)) ++begin;
    while (end > begin && t_emg(end - 1) > t_kin(t_kin.size() - 1)) --end;
    if (end - begin < 2) throw Error(ErrorKind::kInsufficientData, dir.string() + ": streams do not overlap");
    s.emg.data = s.emg.data.middleCols(begin, end - begin).eval();
    s.kin.fs = s.emg.fs;
    s.kin.joint_names = names;
    s.kin.angles = interpolate_rows(t_kin, kin_rows, t_emg.segment(begin, end - begin));
    quantize_to_storage(s.emg.data);
    quantize_to_storage(s.kin.angles);
    validate(s);
    return s;
  }
};

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::unique_ptr<ArchiveAdapter>>& registry() {
  static std::vector<std::unique_ptr<ArchiveAdapter>> adapters = [] {
    std::vector<std::unique_ptr<ArchiveAdapter>> v;
    v.push_back(std::make_unique<CsvSubjectAdapter>());
    return v;
  }();
  return adapters;
}

}  // namespace

void register_adapter(std::unique_ptr<ArchiveAdapter> adapter) {
  std::lock_guard lock(registry_mutex());
  registry().insert(registry().begin(), std::move(adapter));
}

std::vector<Session> import_emgfk(const fs::path& archive) {
  if (!fs::exists(archive)) throw Error(ErrorKind::kIo, "archive not found: " + archive.string());
  std::lock_guard lock(registry_mutex());
  std::string tried;
  for (const auto& a : registry()) {
    if (a->detect(archive)) return a->load(archive);
    tried += (tried.empty() ? "" : ", ") + a->name();
  }
  throw Error(ErrorKind::kUnsupportedLayout,
              "no adapter recognises " + archive.string() + " (tried: " + tried +
                  "); implement emgkin::data::ArchiveAdapter and register it with register_adapter()");
}

}  // namespace emgkin::data
