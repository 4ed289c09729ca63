#pragma once

// Plain-text matrix files: optional header line "# n p", then one row per
// line of whitespace-separated decimal numbers.

#include <filesystem>
#include <iosfwd>

#include "matshrink/matcore.hpp"

namespace matshrink {

Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::filesystem::path& path);

// Values are written with 17 significant digits, so reading back is exact.
void write_matrix(std::ostream& out, const Matrix& m, bool header = true);
void write_matrix_file(const std::filesystem::path& path, const Matrix& m, bool header = true);

}  // namespace matshrink
