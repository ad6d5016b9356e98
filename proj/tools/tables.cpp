#include "tables.hpp"

#include "emgkin/error.hpp"
#include "emgkin/model.hpp"

#include <cmath>
#include <cstdio>

namespace emgkin::cli {

void ensure_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const RunConfig& cfg, const std::vector<std::string>& header) {
  ensure_parent(path);
  out_.open(path);
  if (!out_) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out_ << "# emgkin " << version_string() << '\n';
  out_ << "# run_config " << cfg.to_json().dump() << '\n';
  for (const auto& h : header) cell(h);
  end_row();
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (!first_) out_ << ',';
  first_ = false;
  if (v.find_first_of(",\"\n") == std::string::npos) {
    out_ << v;
  } else {
    out_ << '"';
    for (char c : v) out_ << (c == '"' ? "\"\"" : std::string(1, c));
    out_ << '"';
  }
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_number(v)); }

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace emgkin::cli
