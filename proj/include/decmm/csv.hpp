#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace decmm {

// %.17g round-trips doubles exactly, which keeps CSV output byte-stable for
// identical runs and lets summaries be recomputed from the files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Write-to-temp-then-rename so parallel sweep workers never expose partial
// files.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  std::filesystem::rename(tmp, target);
}

class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header) : columns_(std::move(header)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      body_ += columns_[i];
      if (i + 1 < columns_.size()) body_ += ',';
    }
    body_ += '\n';
  }

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      body_ += cells[i];
      if (i + 1 < cells.size()) body_ += ',';
    }
    body_ += '\n';
  }

  const std::string& str() const { return body_; }
  void write(const std::string& path) const { write_file_atomic(path, body_); }

 private:
  std::vector<std::string> columns_;
  std::string body_;
};

}  // namespace decmm
