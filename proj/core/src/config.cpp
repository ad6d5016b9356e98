#include "emgkin/config.hpp"

#include "emgkin/error.hpp"
#include "emgkin/random.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace emgkin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "run.seed",           "run.threads",
      "model.kind",         "model.standardize_features", "model.standardize_targets",
      "model.mlp_hidden",   "model.ridge_grid",           "model.trr_units",
      "features.bands",     "features.seq_len",           "features.win_ms",
      "features.step_ms",   "features.shrinkage",         "features.reference",
      "features.prefilter", "features.tdf_ssc",           "features.tdf_wamp",
      "train.learning_rate", "train.batch_size",          "train.clip_norm",
      "train.patience",     "train.huber_delta",          "train.dropout",
      "train.max_epochs",   "train.beta1",                "train.beta2",
      "train.epsilon",      "train.shuffle",
      "eval.k",             "eval.val_fraction",          "eval.leakage_guard",
      "sync.search_ms",     "sync.hold_window_ms",        "sync.smooth_hz",
      "sync.min_overlap_s",
  };
  return keys;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (trim(v.substr(used)).empty()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::kInvalidInput, "config: " + key + " = '" + v + "' is not a number");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
    throw Error(ErrorKind::kInvalidInput, "config: " + key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::kInvalidInput, "config: " + key + " = '" + v + "' is not a boolean");
}

std::vector<std::string> list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

BandSpec to_band(const std::string& key, const std::string& v) {
  const auto dash = v.find('-');
  if (dash == std::string::npos) throw Error(ErrorKind::kInvalidInput, "config: " + key + ": band '" + v + "' is not lo-hi");
  return {to_double(key, trim(v.substr(0, dash))), to_double(key, trim(v.substr(dash + 1)))};
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  c.text = text;
  std::stringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(ErrorKind::kInvalidInput, "config line " + std::to_string(line_no) + ": bad section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw Error(ErrorKind::kInvalidInput,
                  "config line " + std::to_string(line_no) + ": expected 'key = value' inside a [section]");
    }
    const std::string key = section + "." + trim(t.substr(0, eq));
    if (!known_keys().count(key)) {
      throw Error(ErrorKind::kInvalidInput, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    c.values[key] = trim(t.substr(eq + 1));
  }
  c.rebuild();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorKind::kInvalidInput, "override '" + assignment + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (!known_keys().count(key)) throw Error(ErrorKind::kInvalidInput, "unknown config key '" + key + "'");
  values[key] = trim(assignment.substr(eq + 1));
  text += "\n# override\n# " + key + " = " + values[key] + "\n";
  rebuild();
}

void RunConfig::rebuild() {
  const auto get = [&](const std::string& k) -> const std::string* {
    const auto it = values.find(k);
    return it == values.end() ? nullptr : &it->second;
  };
  seed = 0;
  threads = 0;
  if (auto v = get("run.seed")) seed = to_size("run.seed", *v);
  if (auto v = get("run.threads")) threads = to_size("run.threads", *v);

  model = ModelSpec::defaults(get("model.kind") ? parse_model_kind(*get("model.kind")) : ModelKind::kTrr);
  auto& m = model;
  if (auto v = get("model.standardize_features")) m.standardize_features = to_bool("model.standardize_features", *v);
  if (auto v = get("model.standardize_targets")) m.standardize_targets = to_bool("model.standardize_targets", *v);
  if (auto v = get("model.mlp_hidden")) {
    m.mlp_hidden.clear();
    for (const auto& s : list(*v)) m.mlp_hidden.push_back(static_cast<Eigen::Index>(to_size("model.mlp_hidden", s)));
  }
  if (auto v = get("model.ridge_grid")) {
    m.ridge_grid.clear();
    for (const auto& s : list(*v)) m.ridge_grid.push_back(to_double("model.ridge_grid", s));
  }
  if (auto v = get("model.trr_units")) {
    const auto u = list(*v);
    if (u.size() != 4) throw Error(ErrorKind::kInvalidInput, "config: model.trr_units needs 4 values (dense, gru1, gru2, head)");
    m.trr.dense_units = static_cast<Eigen::Index>(to_size("model.trr_units", u[0]));
    m.trr.gru1_units = static_cast<Eigen::Index>(to_size("model.trr_units", u[1]));
    m.trr.gru2_units = static_cast<Eigen::Index>(to_size("model.trr_units", u[2]));
    m.trr.head_units = static_cast<Eigen::Index>(to_size("model.trr_units", u[3]));
  }
  auto& f = m.features;
  if (auto v = get("features.bands")) {
    f.cmts.bands.clear();
    for (const auto& s : list(*v)) f.cmts.bands.push_back(to_band("features.bands", s));
  }
  if (auto v = get("features.seq_len")) f.cmts.seq_len = to_size("features.seq_len", *v);
  if (auto v = get("features.win_ms")) f.cmts.win_ms = to_double("features.win_ms", *v);
  if (auto v = get("features.step_ms")) f.cmts.step_ms = to_double("features.step_ms", *v);
  if (auto v = get("features.shrinkage")) {
    if (*v == "none") {
      f.cmts.shrinkage = riemann::NoShrinkage{};
    } else if (*v == "ledoit-wolf") {
      f.cmts.shrinkage = riemann::LedoitWolf{};
    } else {
      f.cmts.shrinkage = riemann::FixedShrinkage{to_double("features.shrinkage", *v)};
    }
  }
  if (auto v = get("features.reference")) {
    if (*v != "geometric" && *v != "arithmetic") {
      throw Error(ErrorKind::kInvalidInput, "config: features.reference must be geometric or arithmetic");
    }
    f.reference = *v == "geometric" ? ReferenceKind::kGeometric : ReferenceKind::kArithmetic;
  }
  if (auto v = get("features.prefilter")) f.cmts.prefilter = to_band("features.prefilter", *v);
  if (auto v = get("features.tdf_ssc")) f.tdf.ssc = to_double("features.tdf_ssc", *v);
  if (auto v = get("features.tdf_wamp")) f.tdf.wamp = to_double("features.tdf_wamp", *v);

  auto& t = m.train;
  if (auto v = get("train.learning_rate")) t.learning_rate = to_double("train.learning_rate", *v);
  if (auto v = get("train.batch_size")) t.batch_size = to_size("train.batch_size", *v);
  if (auto v = get("train.clip_norm")) t.clip_norm = to_double("train.clip_norm", *v);
  if (auto v = get("train.patience")) t.patience = to_size("train.patience", *v);
  if (auto v = get("train.huber_delta")) t.huber_delta = to_double("train.huber_delta", *v);
  if (auto v = get("train.dropout")) t.dropout = to_double("train.dropout", *v);
  if (auto v = get("train.max_epochs")) t.max_epochs = to_size("train.max_epochs", *v);
  if (auto v = get("train.beta1")) t.beta1 = to_double("train.beta1", *v);
  if (auto v = get("train.beta2")) t.beta2 = to_double("train.beta2", *v);
  if (auto v = get("train.epsilon")) t.epsilon = to_double("train.epsilon", *v);
  if (auto v = get("train.shuffle")) t.shuffle = to_bool("train.shuffle", *v);
  t.validate();
  m.trr.dropout = t.dropout;
  t.seed = model_seed();

  cv = {};
  if (auto v = get("eval.k")) cv.k = to_size("eval.k", *v);
  if (auto v = get("eval.val_fraction")) cv.val_fraction = to_double("eval.val_fraction", *v);
  if (auto v = get("eval.leakage_guard")) cv.leakage_guard = to_bool("eval.leakage_guard", *v);
  cv.seed = cv_seed();
  cv.threads = threads;

  sync = {};
  if (auto v = get("sync.search_ms")) sync.search_ms = to_double("sync.search_ms", *v);
  if (auto v = get("sync.hold_window_ms")) sync.hold_window_ms = to_double("sync.hold_window_ms", *v);
  if (auto v = get("sync.smooth_hz")) sync.smooth_hz = to_double("sync.smooth_hz", *v);
  if (auto v = get("sync.min_overlap_s")) sync.min_overlap_s = to_double("sync.min_overlap_s", *v);
  sync.threads = threads;
}

std::uint64_t RunConfig::model_seed() const { return derive_seed(seed, "model"); }
std::uint64_t RunConfig::cv_seed() const { return derive_seed(seed, "cv"); }
std::uint64_t RunConfig::synth_seed() const { return derive_seed(seed, "synth"); }

nlohmann::json RunConfig::to_json() const {
  return {{"text", text},
          {"values", values},
          {"seed", seed},
          {"derived_seeds", {{"model", model_seed()}, {"cv", cv_seed()}, {"synth", synth_seed()}}},
          {"model", model.to_json()},
          {"cv", cv.to_json()},
          {"sync", sync.to_json()},
          {"version", std::string(version_string())}};
}

}  // namespace emgkin
