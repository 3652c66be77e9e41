#pragma once

#include "kwrec/types.hpp"

#include <string>
#include <vector>

namespace kwrec {

// Reals in data files are written with 17 significant digits so every
// double round-trips exactly.
std::string format_real(Scalar value);

std::string format_real_list(const Scalar* values, Index count);

inline std::string format_real_list(const Vector& v) {
  return format_real_list(v.data(), v.size());
}

// Row-major listing of a matrix (Eigen stores column-major internally).
std::string format_matrix_row_major(const Matrix& m);

// RFC-4180 style field quoting; only quotes when needed.
std::string csv_field(const std::string& value);

std::vector<std::string> read_all_lines(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace kwrec
