#include "iselab/csvio.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace iselab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_rational(const Rational& q) {
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

namespace {

void check_cell(const std::string& cell) {
  if (cell.find_first_of(",\n\r") != std::string::npos)
    throw std::invalid_argument("csv cell contains a separator: " + cell);
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> columns)
    : columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("csv needs columns");
  for (const auto& c : columns_) check_cell(c);
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size())
    throw std::invalid_argument("csv row width mismatch");
  for (const auto& c : cells) check_cell(c);
  rows_.push_back(std::move(cells));
}

std::string CsvTable::to_string() const {
  std::string out;
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += columns_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_string(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json flag_obj = nlohmann::json::object();
  for (const auto& [key, value] : flags) flag_obj[key] = value;
  const nlohmann::json j = {
      {"subcommand", subcommand},   {"flags", flag_obj},
      {"seeds", seeds},             {"code_version", code_version},
      {"wall_seconds", wall_seconds}, {"output_digest", output_digest},
  };
  return j.dump(2) + "\n";
}

void write_output(const std::string& path, const std::string& content,
                  RunManifest manifest) {
  manifest.output_digest = digest_string(content);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  const std::string mpath = path + ".manifest.json";
  std::ofstream mout(mpath, std::ios::binary);
  if (!mout) throw std::runtime_error("cannot open manifest file: " + mpath);
  mout << manifest.to_json();
  if (!mout) throw std::runtime_error("write failed: " + mpath);
}

}  // namespace iselab
