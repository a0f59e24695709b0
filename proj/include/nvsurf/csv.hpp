// csv.hpp - deterministic CSV assembly. Numbers are formatted with %.12g so
// identical inputs produce byte-identical bodies; non-finite sensitivities
// serialize as the distinguished token "unmeasurable". Comment lines start
// with '#' and are excluded from determinism comparisons.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nvsurf/errors.hpp"

namespace nvsurf {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return "unmeasurable";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  void comment(const std::string& text) { out_ << "# " << text << "\n"; }

  void header(const std::vector<std::string>& cols) {
    join(cols);
  }

  void row(const std::vector<std::string>& cells) { join(cells); }

  std::string str() const { return out_.str(); }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ValidationError("csv: cannot open " + path);
    os << out_.str();
  }

 private:
  void join(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << cells[i];
    }
    out_ << "\n";
  }
  std::ostringstream out_;
};

// Body of a CSV with comment lines stripped, for determinism comparisons.
inline std::string csv_body(const std::string& text) {
  std::istringstream is(text);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line))
    if (line.empty() || line[0] != '#') os << line << "\n";
  return os.str();
}

}  // namespace nvsurf
