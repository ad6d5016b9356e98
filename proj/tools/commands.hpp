#pragma once

#include "emgkin/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emgkin::cli {

namespace fs = std::filesystem;

struct SynthArgs {
  std::optional<std::uint64_t> seed;
  fs::path out;
  double duration_s = 300.0;
  double shift_ms = 0.0;
  int subjects = 1;
};

struct ImportArgs {
  fs::path archive;
  fs::path out;
};

struct SyncArgs {
  fs::path session;
  bool sweep = false;
  bool whole = false;
  bool halves = false;
  std::vector<double> offsets = {-1000, -500, -200, 0, 200, 500, 1000};
  fs::path out;    // directory for sync.json, curve.csv, sweep.csv
  fs::path apply;  // synchronised session directory
};

struct FeaturesArgs {
  fs::path session;
  fs::path out;
};

struct TrainArgs {
  std::vector<fs::path> sessions;
  fs::path out;
};

struct PredictArgs {
  fs::path model;
  fs::path session;
  fs::path out;
};

struct EvalArgs {
  std::string protocol;
  std::vector<fs::path> sessions;
  fs::path out;
};

struct AblateArgs {
  std::string axis;
  std::vector<fs::path> sessions;
  std::vector<double> values;
  fs::path out;
};

struct BenchArgs {
  fs::path model;
  fs::path session;
  std::size_t n = 500;
  fs::path out;
};

struct PcaArgs {
  std::vector<fs::path> sessions;
  fs::path out;
};

void run_synth(const RunConfig& cfg, const SynthArgs& a);
void run_import(const RunConfig& cfg, const ImportArgs& a);
void run_sync(const RunConfig& cfg, const SyncArgs& a);
void run_features(const RunConfig& cfg, const FeaturesArgs& a);
void run_train(const RunConfig& cfg, const TrainArgs& a);
void run_predict(const RunConfig& cfg, const PredictArgs& a);
void run_eval(const RunConfig& cfg, const EvalArgs& a);
void run_ablate(const RunConfig& cfg, const AblateArgs& a);
void run_bench(const RunConfig& cfg, const BenchArgs& a);
void run_pca(const RunConfig& cfg, const PcaArgs& a);

}  // namespace emgkin::cli
