#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "moldloop/errors.hpp"

namespace moldloop {

// Shortest decimal representation that parses back to the same double.
// Keeps CSV artifacts byte-stable across runs and exactly recomputable.
inline std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error("not a number: '" + s + "'");
  return v;
}

// Row-oriented CSV document with a fixed header. '.' decimal separator,
// '\n' line endings, no quoting (cells must not contain commas).
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    explicit Row(std::size_t expected) { cells_.reserve(expected); }
    Row& add(double v) { cells_.push_back(format_double(v)); return *this; }
    Row& add(int v) { cells_.push_back(std::to_string(v)); return *this; }
    Row& add(std::uint64_t v) { cells_.push_back(std::to_string(v)); return *this; }
    Row& add(bool v) { cells_.push_back(v ? "1" : "0"); return *this; }
    Row& add(std::string v) { cells_.push_back(std::move(v)); return *this; }
    std::vector<std::string> cells_;
  };

  Row& new_row() {
    rows_.emplace_back(header_.size());
    return rows_.back();
  }

  void append(Row row) {
    if (row.cells_.size() != header_.size())
      throw ShapeError("csv row width " + std::to_string(row.cells_.size()) +
                       " != header width " + std::to_string(header_.size()));
    rows_.push_back(std::move(row));
  }

  std::string to_string() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r.cells_);
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path);
    f << to_string();
  }

  std::size_t n_rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

 private:
  static void write_line(std::ostringstream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

// Minimal reader for the spot-check tooling: header + string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw Error("csv column not found: " + name);
  }
  double num(std::size_t row, const std::string& name) const {
    return parse_double(rows.at(row).at(static_cast<std::size_t>(column(name))));
  }
};

inline CsvTable load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace moldloop
