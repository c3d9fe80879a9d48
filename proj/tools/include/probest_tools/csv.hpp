#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace probest::tools {

/// Header plus raw cells of a comma-separated file without quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws std::out_of_range when absent.
  std::size_t column(const std::string& name) const;
};

/// Throws probest::ParseError on ragged rows or an empty file.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace probest::tools
