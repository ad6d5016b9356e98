#pragma once

#include "emgkin/eval.hpp"
#include "emgkin/model.hpp"
#include "emgkin/sync.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace emgkin {

// Plain-text run configuration:
//
//   # comment
//   [section]
//   key = value
//
// Sections: run, model, features, train, eval, sync. Unknown sections or
// keys are errors. Keys left out keep the model kind's defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  ModelSpec model = ModelSpec::defaults(ModelKind::kTrr);
  eval::CvConfig cv;
  sync::SyncConfig sync;
  std::string text;  // source, echoed into reports
  std::map<std::string, std::string> values;  // "section.key" -> value, as parsed

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  // Applies one "section.key=value" override on top of the parsed values.
  void set(const std::string& assignment);

  // Seeds split from the root seed, one per component.
  std::uint64_t model_seed() const;
  std::uint64_t cv_seed() const;
  std::uint64_t synth_seed() const;

  nlohmann::json to_json() const;

 private:
  void rebuild();
};

}  // namespace emgkin
