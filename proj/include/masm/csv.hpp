#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "masm/errors.hpp"

namespace masm {

// Minimal CSV emitter with the fixed schema: header row, comma separator,
// '.' decimal, lowercase column names, caller-controlled (deterministic)
// row order.
class csv_writer {
public:
  csv_writer(const std::string& path, const std::vector<std::string>& columns) : out_(path, std::ios::trunc) {
    if (!out_) throw format_error("csv_writer: cannot open " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void field(const std::string& s) {
    sep();
    out_ << s;
  }

  void field(long v) {
    sep();
    out_ << v;
  }

  void field(int v) { field(static_cast<long>(v)); }

  void field(double v) {
    sep();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_ << buf;
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ofstream out_;
  bool first_ = true;
};

}  // namespace masm
