#pragma once

#include "emgkin/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace emgkin::cli {

// CSV with '#' comment lines carrying the version and the run configuration.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const RunConfig& cfg, const std::vector<std::string>& header);

  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(double v);
  void end_row();

 private:
  std::ofstream out_;
  bool first_ = true;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Creates parent directories of `path`.
void ensure_parent(const std::filesystem::path& path);

std::string format_number(double v);

}  // namespace emgkin::cli
