#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rfs::io {

/// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(const std::string& name) const;
  int require_column(const std::string& name, const std::string& context) const;
};

/// RFC-4180-ish reader: comma separated, optional double quotes, header row
/// mandatory. Blank lines are skipped.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& context = "csv");

std::string csv_escape(const std::string& field);

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

}  // namespace rfs::io
