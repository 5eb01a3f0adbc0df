#pragma once

// Deterministic CSV emission: ',' separator, '.' decimal, mandatory header
// row. Doubles are printed with 17 significant digits so parsing the file
// recovers them bit-exactly. Undefined cells are left empty.

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

#include "lqgpriv/linalg.hpp"

namespace lqgpriv {

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& field(double v) { return field(std::string_view(csv_double(v))); }
  CsvWriter& field(long long v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  CsvWriter& blank() { return field(std::string_view("")); }

  /// Headers name_r_c for an r x c matrix (row-major), or name_i for vectors.
  CsvWriter& matrix_header(std::string_view name, Eigen::Index rows,
                           Eigen::Index cols) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        field(std::string(name) + "_" + std::to_string(r) + "_" +
              std::to_string(c));
      }
    }
    return *this;
  }
  CsvWriter& vector_header(std::string_view name, Eigen::Index size) {
    for (Eigen::Index i = 0; i < size; ++i) {
      field(std::string(name) + "_" + std::to_string(i));
    }
    return *this;
  }

  CsvWriter& matrix_fields(const Matrix& x) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) field(x(r, c));
    }
    return *this;
  }
  CsvWriter& vector_fields(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) field(v(i));
    return *this;
  }
  CsvWriter& blanks(Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) blank();
    return *this;
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace lqgpriv
