#include "emgkin/data.hpp"
#include "emgkin/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace emgkin;
using namespace emgkin::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("emgkin_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// A plausible open hand: fingers fanned out from the wrist.
HandFrame sample_hand(Rng& rng) {
  HandFrame f;
  f[0] = Eigen::Vector3d::Zero();
  for (int finger = 0; finger < 5; ++finger) {
    const double ang = 0.4 * (finger - 2);
    Eigen::Vector3d dir(std::sin(ang), std::cos(ang), 0.0);
    Eigen::Vector3d p = f[0];
    for (int k = 0; k < 4; ++k) {
      const Eigen::Vector3d bend(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.5, 0.5));
      p += 0.03 * (dir + bend).normalized();
      f[static_cast<std::size_t>(1 + 4 * finger + k)] = p;
    }
  }
  return f;
}

double angle_at(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d u = a - b, v = c - b;
  return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("joint map: 15 named triplets, three per finger") {
  const auto& m = joint_map();
  const auto names = joint_names();
  REQUIRE(names.size() == 15);
  CHECK(names.front() == "thumb_cmc");
  CHECK(names.back() == "pinky_dip");
  for (const auto& t : m) {
    CHECK(t.a >= 0);
    CHECK(t.c < kLandmarkCount);
  }
  CHECK(finger_of("ring_pip") == "ring");
}

TEST_CASE("collinear triplets are straight (180) and right angles are 90") {
  HandFrame f;
  for (int p = 0; p < kLandmarkCount; ++p) f[static_cast<std::size_t>(p)] = Eigen::Vector3d(0, p, 0);
  const LandmarkAngles straight = angles_from_landmarks({f}, 30.0);
  CHECK((straight.track.angles.array() - 180.0).abs().maxCoeff() < 1e-9);

  // bend index PIP (5, 6, 7 around 6) by 90 degrees
  HandFrame g = f;
  g[7] = g[6] + Eigen::Vector3d(1, 0, 0);
  const LandmarkAngles bent = angles_from_landmarks({g}, 30.0);
  const auto names = joint_names();
  const auto idx = std::find(names.begin(), names.end(), "index_pip") - names.begin();
  CHECK(bent.track.angles(idx, 0) == doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("angles match an arccos oracle and are invariant to rigid motion and scaling") {
  Rng rng(1);
  std::vector<HandFrame> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(sample_hand(rng));
  const LandmarkAngles base = angles_from_landmarks(frames, 30.0);
  CHECK(base.filled == 0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t j = 0; j < 15; ++j) {
      const auto& tr = joint_map()[j];
      const auto& f = frames[t];
      CHECK(base.track.angles(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) ==
            doctest::Approx(angle_at(f[tr.a], f[tr.b], f[tr.c])).epsilon(1e-9));
    }
  }
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()) * Eigen::AngleAxisd(-1.1, Eigen::Vector3d::UnitZ()))
          .toRotationMatrix();
  const Eigen::Vector3d shift(0.3, -2.0, 5.0);
  std::vector<HandFrame> moved = frames;
  for (auto& f : moved)
    for (auto& p : f) p = 2.5 * (rot * p) + shift;
  const LandmarkAngles m = angles_from_landmarks(moved, 30.0);
  CHECK((m.track.angles - base.track.angles).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("degenerate frames are in-filled from their neighbours") {
  Rng rng(2);
  std::vector<HandFrame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(sample_hand(rng));
  frames[2][6] = frames[2][5];  // zero-length bone at index PIP and MCP
  const LandmarkAngles r = angles_from_landmarks(frames, 30.0);
  CHECK(r.filled >= 1);
  CHECK(r.track.angles.allFinite());
  const auto names = joint_names();
  const auto idx = std::find(names.begin(), names.end(), "index_pip") - names.begin();
  CHECK(r.track.angles(idx, 2) == doctest::Approx(0.5 * (r.track.angles(idx, 1) + r.track.angles(idx, 3))));

  std::vector<HandFrame> all_bad(3);
  for (auto& f : all_bad) f.fill(Eigen::Vector3d::Zero());
  try {
    angles_from_landmarks(all_bad, 30.0);
    FAIL("expected kInsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
}

TEST_CASE("session save and load round-trip bit for bit") {
  TempDir dir("roundtrip");
  SynthConfig c;
  c.duration_s = 5.0;
  c.seed = 3;
  Session s = generate_synthetic(c);
  s.attributes["note"] = "hello";
  s.sync_offset_ms = 12.0;
  save_session(s, dir.path / "s");
  const Session t = load_session(dir.path / "s");
  CHECK(t.emg.data == s.emg.data);
  CHECK(t.kin.angles == s.kin.angles);
  CHECK(t.emg.fs == s.emg.fs);
  CHECK(t.emg.channel_names == s.emg.channel_names);
  CHECK(t.kin.joint_names == s.kin.joint_names);
  CHECK(t.subject_id == s.subject_id);
  CHECK(t.sync_offset_ms == 12.0);
  CHECK(t.attributes == s.attributes);
  CHECK(t.provenance.kind == Provenance::Kind::kSynthetic);
  CHECK(t.provenance.seed == 3);
  CHECK(t.provenance.params == s.provenance.params);

  // saving the loaded copy reproduces identical files
  save_session(t, dir.path / "t");
  for (const char* f : {"emg.bin", "kin.bin"}) {
    std::ifstream a(dir.path / "s" / f, std::ios::binary), b(dir.path / "t" / f, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }
}

TEST_CASE("truncated matrix files report the byte counts") {
  TempDir dir("truncated");
  Rng rng(4);
  const Eigen::MatrixXd m = testutil::randn(3, 10, rng);
  write_matrix_file(dir.path / "m.bin", m);
  const auto size = fs::file_size(dir.path / "m.bin");
  CHECK(size == 20 + 3 * 10 * 4);
  fs::resize_file(dir.path / "m.bin", size - 7);
  try {
    read_matrix_file(dir.path / "m.bin");
    FAIL("expected kShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShapeMismatch);
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(size)) != std::string::npos);
    CHECK(msg.find(std::to_string(size - 7)) != std::string::npos);
  }
  write_file(dir.path / "junk.bin", "not a matrix file at all");
  CHECK_THROWS_AS(read_matrix_file(dir.path / "junk.bin"), Error);
}

TEST_CASE("validation rejects mismatched rates and lengths") {
  SynthConfig c;
  c.duration_s = 3.0;
  Session s = generate_synthetic(c);
  Session bad = s;
  bad.kin.fs = 100.0;
  try {
    validate(bad);
    FAIL("expected kValidation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
  }
  bad = s;
  bad.kin.angles.conservativeResize(Eigen::NoChange, bad.kin.n_samples() - 1);
  CHECK_THROWS_AS(validate(bad), Error);
  bad = s;
  bad.emg.data(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("generator: same seed, same session; different seed, different session") {
  SynthConfig c;
  c.duration_s = 10.0;
  c.seed = 42;
  const Session a = generate_synthetic(c), b = generate_synthetic(c);
  CHECK(a.emg.data == b.emg.data);
  CHECK(a.kin.angles == b.kin.angles);
  c.seed = 43;
  const Session d = generate_synthetic(c);
  CHECK(a.emg.data != d.emg.data);
  CHECK(a.provenance.params == b.provenance.params);
}

TEST_CASE("generator output: shapes, ranges and storage precision") {
  SynthConfig c;
  c.duration_s = 20.0;
  c.seed = 5;
  const Session s = generate_synthetic(c);
  CHECK(s.emg.n_channels() == 8);
  CHECK(s.kin.n_joints() == 15);
  CHECK(s.emg.n_samples() == 10000);
  CHECK(s.kin.angles.minCoeff() >= 10.0);
  CHECK(s.kin.angles.maxCoeff() <= 170.0);
  CHECK(s.kin.joint_names == joint_names());
  for (Eigen::Index i = 0; i < s.emg.data.size(); ++i) {
    CHECK(static_cast<double>(static_cast<float>(s.emg.data.data()[i])) == s.emg.data.data()[i]);
    if (i > 100) break;
  }
  validate(s);

  SynthConfig bad = c;
  bad.fs = -1;
  CHECK_THROWS_AS(generate_synthetic(bad), Error);
  bad = c;
  bad.coupling = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(generate_synthetic(bad), Error);
}

TEST_CASE("zero coupling, noise and baseline give silent EMG") {
  SynthConfig c;
  c.duration_s = 5.0;
  c.coupling = Eigen::MatrixXd::Zero(8, 15);
  c.posture_coupling = Eigen::MatrixXd::Zero(8, 15);
  c.noise = 0.0;
  c.baseline = 0.0;
  const Session s = generate_synthetic(c);
  CHECK(s.emg.data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("population shares the mapping but not the placement") {
  SynthConfig base;
  base.duration_s = 5.0;
  base.seed = 6;
  const auto pop = generate_population(base, 3);
  REQUIRE(pop.size() == 3);
  CHECK(pop[0].subject_id == "S01");
  CHECK(pop[2].subject_id == "S03");
  CHECK(pop[0].provenance.params["coupling"] == pop[1].provenance.params["coupling"]);
  CHECK(pop[0].provenance.params["electrode_shift"] != pop[1].provenance.params["electrode_shift"]);
  CHECK(pop[0].emg.data != pop[1].emg.data);
}

TEST_CASE("apply_offset pairs EMG at t with kinematics at t + offset") {
  SynthConfig c;
  c.duration_s = 4.0;
  const Session s = generate_synthetic(c);
  const Session p = apply_offset(s, 100.0);  // 50 samples
  CHECK(p.emg.n_samples() == s.emg.n_samples() - 50);
  CHECK(p.emg.data.col(0) == s.emg.data.col(0));
  CHECK(p.kin.angles.col(0) == s.kin.angles.col(50));
  const Session n = apply_offset(s, -100.0);
  CHECK(n.emg.data.col(0) == s.emg.data.col(50));
  CHECK(n.kin.angles.col(0) == s.kin.angles.col(0));
  const Session z = slice(s, 10, 20);
  CHECK(z.emg.n_samples() == 10);
  CHECK(z.kin.angles.col(0) == s.kin.angles.col(10));
}

TEST_CASE("csv archive import: joint angles and landmarks, time-aligned") {
  TempDir dir("import");
  const double fs = 500.0;
  const Eigen::Index n = 2000;
  Rng rng(7);
  for (const char* subj : {"subject_a", "subject_b"}) {
    fs::create_directories(dir.path / subj);
    std::ofstream emg(dir.path / subj / "emg.csv");
    emg << "time";
    for (int c = 0; c < 8; ++c) emg << ",ch" << c;
    emg << "\n";
    for (Eigen::Index t = 0; t < n; ++t) {
      emg << static_cast<double>(t) / fs;
      for (int c = 0; c < 8; ++c) emg << "," << rng.normal();
      emg << "\n";
    }
  }
  {
    // angles at 100 Hz covering [0.5, 3.5] s: a ramp per joint
    std::ofstream k(dir.path / "subject_a" / "kinematics.csv");
    k << "time";
    for (const auto& name : joint_names()) k << "," << name;
    k << "\n";
    for (int f = 50; f <= 350; ++f) {
      const double t = f / 100.0;
      k << t;
      for (int j = 0; j < 15; ++j) k << "," << 20.0 + 10.0 * t + j;
      k << "\n";
    }
  }
  {
    std::ofstream k(dir.path / "subject_b" / "landmarks.csv");
    k << "time";
    for (int p = 0; p < 63; ++p) k << ",v" << p;
    k << "\n";
    for (int f = 0; f <= 120; ++f) {
      k << f / 30.0;
      const HandFrame h = sample_hand(rng);
      for (const auto& p : h) k << "," << p.x() << "," << p.y() << "," << p.z();
      k << "\n";
    }
  }
  const auto sessions = import_emgfk(dir.path);
  REQUIRE(sessions.size() == 2);
  const Session& a = sessions[0];
  CHECK(a.subject_id == "subject_a");
  CHECK(a.emg.fs == doctest::Approx(500.0));
  CHECK(a.kin.fs == a.emg.fs);
  CHECK(a.emg.n_samples() == 1501);  // EMG trimmed to [0.5, 3.5] s
  for (Eigen::Index t = 0; t < a.kin.n_samples(); t += 97) {
    const double time = 0.5 + static_cast<double>(t) / fs;
    CHECK(a.kin.angles(3, t) == doctest::Approx(23.0 + 10.0 * time).epsilon(1e-6));
  }
  const Session& b = sessions[1];
  CHECK(b.kin.n_joints() == 15);
  CHECK(b.kin.angles.minCoeff() >= 0.0);
  CHECK(b.kin.angles.maxCoeff() <= 180.0);
  CHECK(b.provenance.kind == Provenance::Kind::kReal);
}

TEST_CASE("unknown archive layouts are rejected with a pointer to the adapter interface") {
  TempDir dir("unknown");
  write_file(dir.path / "readme.txt", "nothing here");
  try {
    import_emgfk(dir.path);
    FAIL("expected kUnsupportedLayout");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedLayout);
    CHECK(std::string(e.what()).find("ArchiveAdapter") != std::string::npos);
  }
}

TEST_CASE("registered adapters take part in detection") {
  class Fake : public ArchiveAdapter {
   public:
    std::string name() const override { return "fake"; }
    bool detect(const fs::path& p) const override { return fs::exists(p / "fake.marker"); }
    std::vector<Session> load(const fs::path&) const override {
      SynthConfig c;
      c.duration_s = 1.0;
      return {generate_synthetic(c)};
    }
  };
  register_adapter(std::make_unique<Fake>());
  TempDir dir("fake");
  write_file(dir.path / "fake.marker", "");
  CHECK(import_emgfk(dir.path).size() == 1);
}

TEST_CASE("acquisition filter removes mains interference") {
  const double fs = 500.0;
  EmgRecording rec = testutil::white_noise(1, 5000, fs, 9);
  for (Eigen::Index t = 0; t < 5000; ++t) rec.data(0, t) += 5.0 * std::sin(2 * std::numbers::pi * 50.0 * t / fs);
  const EmgRecording f = acquisition_filter(rec);
  const Eigen::VectorXd y = f.data.row(0).segment(1000, 3000).transpose();
  const Eigen::VectorXd x = rec.data.row(0).segment(1000, 3000).transpose();
  CHECK(testutil::dft_power(y, 50.0, fs) < 1e-3 * testutil::dft_power(x, 50.0, fs));
}
