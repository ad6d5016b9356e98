#include "emgkin/data.hpp"

#include "emgkin/error.hpp"
#include "emgkin/signal/signal.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace emgkin::data {

static_assert(std::endian::native == std::endian::little,
              "the storage format is little-endian; add byte swapping for this host");

namespace {

constexpr char kMatrixMagic[8] = {'E', 'M', 'G', 'K', 'B', 'I', 'N', '1'};
constexpr std::size_t kMatrixHeader = 8 + 4 + 8;
constexpr const char* kFormatTag = "emgkin-session/1";

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorKind::kValidation, "meta: missing key '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kValidation, "meta: '" + key + "' is not a number: " + it->second);
  }
}

}  // namespace

void validate(const Session& s) {
  validate(s.emg);
  validate(s.kin);
  if (s.emg.fs != s.kin.fs) {
    throw Error(ErrorKind::kValidation,
                "EMG at " + format_double(s.emg.fs) + " Hz but kinematics at " +
                    format_double(s.kin.fs) + " Hz; resample the kinematics first");
  }
  if (s.emg.n_samples() != s.kin.n_samples()) {
    throw Error(ErrorKind::kValidation,
                "EMG has " + std::to_string(s.emg.n_samples()) + " samples but kinematics has " +
                    std::to_string(s.kin.n_samples()));
  }
}

void quantize_to_storage(Eigen::MatrixXd& m) {
  m = m.cast<float>().cast<double>();
}

void write_matrix_file(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto len = static_cast<std::uint64_t>(m.cols());
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  std::vector<float> row(static_cast<std::size_t>(len));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = static_cast<float>(m(r, c));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const auto actual = std::filesystem::file_size(path);
  char magic[8];
  std::uint32_t rows = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::kValidation, path.string() + ": malformed header (bad magic or short file)");
  }
  const std::uint64_t expected = kMatrixHeader + std::uint64_t{rows} * len * sizeof(float);
  if (actual != expected) {
    throw Error(ErrorKind::kShapeMismatch,
                path.string() + ": expected " + std::to_string(expected) + " bytes for " +
                    std::to_string(rows) + " x " + std::to_string(len) + " float32, found " +
                    std::to_string(actual) + " bytes");
  }
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(len));
  std::vector<float> row(static_cast<std::size_t>(len));
  for (std::uint32_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(len * sizeof(float)));
    for (std::uint64_t c = 0; c < len; ++c) {
      const float v = row[c];
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kValidation, path.string() + ": non-finite value at row " +
                                                std::to_string(r) + ", column " + std::to_string(c));
      }
      m(r, static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

void save_session(const Session& s, const std::filesystem::path& dir) {
  validate(s);
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "meta", std::ios::trunc);
    if (!meta) throw Error(ErrorKind::kIo, "cannot write " + (dir / "meta").string());
    meta << "format = " << kFormatTag << '\n'
         << "subject_id = " << s.subject_id << '\n'
         << "emg_fs = " << format_double(s.emg.fs) << '\n'
         << "kin_fs = " << format_double(s.kin.fs) << '\n'
         << "channel_names = " << join(s.emg.channel_names) << '\n'
         << "joint_names = " << join(s.kin.joint_names) << '\n'
         << "sync_offset_ms = " << format_double(s.sync_offset_ms) << '\n'
         << "sync_applied = " << (s.sync_applied ? "true" : "false") << '\n'
         << "provenance = " << (s.provenance.kind == Provenance::Kind::kSynthetic ? "synthetic" : "real")
         << '\n'
         << "provenance_seed = " << s.provenance.seed << '\n'
         << "provenance_params = " << (s.provenance.params.is_null() ? "{}" : s.provenance.params.dump())
         << '\n';
    for (const auto& [k, v] : s.attributes) meta << "attr." << k << " = " << v << '\n';
    if (!meta) throw Error(ErrorKind::kIo, "write failed: " + (dir / "meta").string());
  }
  write_matrix_file(dir / "emg.bin", s.emg.data);
  write_matrix_file(dir / "kin.bin", s.kin.angles);
}

Session load_session(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "meta");
  if (!meta) throw Error(ErrorKind::kIo, "no session at " + dir.string() + " (missing meta)");
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kValidation,
                  "meta line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  if (kv["format"] != kFormatTag) {
    throw Error(ErrorKind::kValidation, "meta: unknown format '" + kv["format"] + "'");
  }

  Session s;
  s.subject_id = kv["subject_id"];
  s.emg.fs = parse_double(kv, "emg_fs");
  s.kin.fs = parse_double(kv, "kin_fs");
  s.emg.channel_names = split(kv["channel_names"]);
  s.kin.joint_names = split(kv["joint_names"]);
  s.sync_offset_ms = parse_double(kv, "sync_offset_ms");
  s.sync_applied = kv["sync_applied"] == "true";
  s.provenance.kind =
      kv["provenance"] == "synthetic" ? Provenance::Kind::kSynthetic : Provenance::Kind::kReal;
  s.provenance.seed = std::stoull(kv.count("provenance_seed") ? kv["provenance_seed"] : "0");
  try {
    s.provenance.params = nlohmann::json::parse(kv.count("provenance_params") ? kv["provenance_params"] : "{}");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kValidation, std::string("meta: provenance_params: ") + e.what());
  }
  for (const auto& [k, v] : kv) {
    if (k.rfind("attr.", 0) == 0) s.attributes[k.substr(5)] = v;
  }
  s.emg.data = read_matrix_file(dir / "emg.bin");
  s.kin.angles = read_matrix_file(dir / "kin.bin");
  validate(s);
  return s;
}

Session apply_offset(const Session& s, double offset_ms) {
  validate(s);
  const auto d = static_cast<Eigen::Index>(signal::ms_to_samples(std::abs(offset_ms), s.emg.fs));
  const Eigen::Index n = s.emg.n_samples();
  if (d >= n) {
    throw Error(ErrorKind::kInsufficientData,
                "offset of " + format_double(offset_ms) + " ms leaves no overlapping samples");
  }
  Session out = s;
  const Eigen::Index len = n - d;
  if (offset_ms >= 0) {
    out.emg.data = s.emg.data.leftCols(len);
    out.kin.angles = s.kin.angles.rightCols(len);
  } else {
    out.emg.data = s.emg.data.rightCols(len);
    out.kin.angles = s.kin.angles.leftCols(len);
  }
  return out;
}

Session slice(const Session& s, Eigen::Index begin, Eigen::Index end) {
  if (begin < 0 || end > s.emg.n_samples() || begin >= end) {
    throw Error(ErrorKind::kInvalidInput, "slice [" + std::to_string(begin) + ", " +
                                              std::to_string(end) + ") is outside the session");
  }
  Session out = s;
  out.emg.data = s.emg.data.middleCols(begin, end - begin);
  out.kin.angles = s.kin.angles.middleCols(begin, end - begin);
  return out;
}

}  // namespace emgkin::data
