#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lamg/errors.hpp"

namespace lamg {

// Shortest round-trip-exact decimal form. All numeric output funnels through
// here so repeated runs of a seeded experiment produce byte-identical files.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    out_ << header << "\n";
  }

  void field(const std::string& s) {
    if (!first_) out_ << ",";
    out_ << s;
    first_ = false;
  }
  void field(double x) { field(fmt_g17(x)); }
  void field(int x) { field(std::to_string(x)); }
  void field(long x) { field(std::to_string(x)); }
  void field(std::size_t x) { field(std::to_string(x)); }

  void end_row() {
    out_ << "\n";
    first_ = true;
  }

 private:
  std::ofstream out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw IoError("csv column not found: " + name);
  }
  double num(std::size_t row, int col) const { return std::stod(rows[row][col]); }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

}  // namespace lamg
