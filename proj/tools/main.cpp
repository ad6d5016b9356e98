#include "commands.hpp"

#include "emgkin/error.hpp"
#include "emgkin/model.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

using namespace emgkin;
using namespace emgkin::cli;

namespace {

// First line is for machines, the rest for people.
int report_error(const std::string& kind, const std::string& command, const std::string& detail, int code) {
  std::cerr << "error kind=" << kind << " command=" << (command.empty() ? "-" : command) << '\n' << detail << '\n';
  return code;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  RunConfig cfg = path.empty() ? RunConfig::parse("") : RunConfig::load(path);
  for (const auto& s : sets) cfg.set(s);
  // The environment wins over the file; 0 defers to default_threads().
  if (const char* env = std::getenv("EMGKIN_THREADS"); env && *env) {
    cfg.threads = 0;
    cfg.cv.threads = 0;
    cfg.sync.threads = 0;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMG to finger-kinematics decoding toolkit"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Run configuration file (INI-style sections)")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override one config value, section.key=value (repeatable)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic session");
  c_synth->add_option("--seed", synth.seed, "Generator seed (default: derived from run.seed)");
  c_synth->add_option("--out", synth.out, "Output session directory")->required();
  c_synth->add_option("--duration", synth.duration_s, "Duration in seconds")->capture_default_str();
  c_synth->add_option("--shift-ms", synth.shift_ms, "Delay injected into the kinematics")->capture_default_str();
  c_synth->add_option("--subjects", synth.subjects, "Number of subjects; >1 writes one directory each")
      ->capture_default_str();

  ImportArgs imp;
  auto* c_import = app.add_subcommand("import-emgfk", "Convert a dataset archive to canonical sessions");
  c_import->add_option("--archive", imp.archive, "Archive directory")->required();
  c_import->add_option("--out", imp.out, "Output directory")->required();

  SyncArgs sy;
  auto* c_sync = app.add_subcommand("sync", "Estimate the EMG/kinematics offset");
  c_sync->add_option("--session", sy.session, "Session directory")->required();
  c_sync->add_flag("--sweep", sy.sweep, "Also evaluate the model at shifted offsets");
  c_sync->add_option("--offsets", sy.offsets, "Sweep offsets in ms")->delimiter(',');
  c_sync->add_flag("--whole", sy.whole, "One offset for the whole session");
  c_sync->add_flag("--halves", sy.halves, "Independent offsets per half (default for real sessions)");
  c_sync->add_option("--out", sy.out, "Directory for sync.json, curve.csv and sweep.csv");
  c_sync->add_option("--apply", sy.apply, "Write the synchronised session here");

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "Dump windowed features for inspection");
  c_feat->add_option("--session", feat.session, "Session directory")->required();
  c_feat->add_option("--out", feat.out, "Output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on one or more sessions");
  c_train->add_option("--session,--sessions", tr.sessions, "Session directories")->required();
  c_train->add_option("--out", tr.out, "Model artifact path")->required();

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Predict joint angles for a session");
  c_predict->add_option("--model", pr.model, "Model artifact")->required();
  c_predict->add_option("--session", pr.session, "Session directory")->required();
  c_predict->add_option("--out", pr.out, "CSV output (time + one column per joint)")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Cross-validated evaluation");
  c_eval->add_option("protocol", ev.protocol, "intra or loso")->required()->check(CLI::IsMember({"intra", "loso"}));
  c_eval->add_option("--session,--sessions", ev.sessions, "Session directories")->required();
  c_eval->add_option("--out", ev.out, "Report directory")->required();

  AblateArgs ab;
  ab.out = ".";
  auto* c_ablate = app.add_subcommand("ablate", "Sweep one experimental axis");
  c_ablate->add_option("axis", ab.axis, "duration, offset, bands or seqlen")
      ->required()
      ->check(CLI::IsMember({"duration", "offset", "bands", "seqlen"}));
  c_ablate->add_option("--session,--sessions", ab.sessions, "Session directories")->required();
  c_ablate->add_option("--values", ab.values, "Axis values (fractions, ms or lengths)")->delimiter(',');
  c_ablate->add_option("--out", ab.out, "Output directory")->capture_default_str();

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Per-sample feature and inference timing");
  c_bench->add_option("--model", be.model, "Model artifact")->required();
  c_bench->add_option("--session", be.session, "Session directory")->required();
  c_bench->add_option("--n", be.n, "Timed samples")->capture_default_str();
  c_bench->add_option("--out", be.out, "JSON output");

  PcaArgs pc;
  auto* c_pca = app.add_subcommand("pca", "Explained variance of the joint angles");
  c_pca->add_option("--session,--sessions", pc.sessions, "Session directories")->required();
  c_pca->add_option("--out", pc.out, "CSV of the explained-variance curve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    return report_error("usage", subs.empty() ? "" : subs.front()->get_name(), e.what(), 2);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = load_config(config_path, sets);
    if (command == "synth") run_synth(cfg, synth);
    else if (command == "import-emgfk") run_import(cfg, imp);
    else if (command == "sync") run_sync(cfg, sy);
    else if (command == "features") run_features(cfg, feat);
    else if (command == "train") run_train(cfg, tr);
    else if (command == "predict") run_predict(cfg, pr);
    else if (command == "eval") run_eval(cfg, ev);
    else if (command == "ablate") run_ablate(cfg, ab);
    else if (command == "bench") run_bench(cfg, be);
    else if (command == "pca") run_pca(cfg, pc);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.kind())), command, e.what(), 1);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", command, e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", command, e.what(), 1);
  }
  return 0;
}
