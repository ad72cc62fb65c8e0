#pragma once

#include <string>
#include <vector>

namespace tabfuse {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

/// Reads a comma-separated file with a header row. Cells are kept verbatim
/// (no quoting rules; the file formats in this project never embed commas).
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::string& path, const CsvTable& table);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

/// Strict double parse; sets *ok=false instead of throwing on garbage.
double parse_double(const std::string& s, bool* ok);
/// Same, with the out-parameter/flag roles swapped for call-site brevity.
bool parse_double(const std::string& s, double& out);

}  // namespace tabfuse
