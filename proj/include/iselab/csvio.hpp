#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "iselab/rational.hpp"

namespace iselab {

inline constexpr const char* kIselabVersion = "0.1.0";

// Shortest round-trip decimal with up to 17 significant digits.
std::string format_double(double v);

// Lossless "p/q", denominator always present ("3/1", "-1/2").
std::string format_rational(const Rational& q);

// Deterministic CSV: fixed column order, append-order rows (producers emit
// rows already sorted by their key columns), LF line endings. Cells must not
// contain separators or line breaks.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
  size_t row_count() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string digest_string(const std::string& bytes);  // "fnv1a64:<16 hex>"

struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> flags;
  std::vector<std::uint64_t> seeds;
  std::string code_version = kIselabVersion;
  double wall_seconds = 0.0;
  std::string output_digest;
  std::string to_json() const;
};

// Writes content to path and the manifest (digest filled from content) to
// path + ".manifest.json".
void write_output(const std::string& path, const std::string& content,
                  RunManifest manifest);

}  // namespace iselab
