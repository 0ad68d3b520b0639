#ifndef IBFLOW_IO_HPP
#define IBFLOW_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ibflow/error.hpp"
#include "ibflow/matrix.hpp"

namespace ibflow {

/// Shortest exact decimal representation of a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // prefer the shorter form when it round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char t[32];
    std::snprintf(t, sizeof(t), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(t, "%lf", &back);
    if (back == v) return t;
  }
  return buf;
}

/// CSV with one header line, comma-separated decimal floats, one sample
/// per row, LF line endings.
inline void write_csv(const std::string& path, const SampleMatrix& m,
                      const std::vector<std::string>& header = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file for writing: " + path);
  for (std::size_t j = 0; j < m.n_cols; ++j) {
    if (j) out << ',';
    out << (j < header.size() ? header[j] : "c" + std::to_string(j));
  }
  out << '\n';
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    for (std::size_t j = 0; j < m.n_cols; ++j) {
      if (j) out << ',';
      out << format_double(m.at(i, j));
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

inline SampleMatrix read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty file: " + path);
  std::vector<double> values;
  std::size_t n_cols = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t cols = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      const std::string cell = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw Error("non-numeric cell in " + path + " at line " +
                    std::to_string(line_no) + ": '" + cell + "'");
      values.push_back(v);
      ++cols;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (n_cols == 0)
      n_cols = cols;
    else if (cols != n_cols)
      throw Error("ragged row in " + path + " at line " +
                  std::to_string(line_no));
  }
  if (n_cols == 0) throw Error("no data rows in " + path);
  SampleMatrix m;
  m.n_cols = n_cols;
  m.n_rows = values.size() / n_cols;
  m.data = std::move(values);
  return m;
}

}  // namespace ibflow

#endif  // IBFLOW_IO_HPP
