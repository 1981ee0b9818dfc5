#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "knockforge/linalg.hpp"

namespace knockforge {

// Shortest round-trip form with at most 17 significant digits, no locale;
// infinities as "inf"/"-inf".
std::string format_double(double value);

struct CsvMatrix {
  std::vector<std::string> header;
  Matrix values;
};

// Comma-separated numeric table with one header line. Throws IoError when the
// file cannot be opened and ContractViolation (naming the file) for ragged or
// non-numeric content.
CsvMatrix read_csv(const std::string& path);
CsvMatrix parse_csv(std::istream& in, const std::string& name);

void write_csv(std::ostream& out, const Matrix& values, const std::vector<std::string>& header);
// Throws IoError when the file cannot be written.
void write_csv_file(const std::string& path, const Matrix& values,
                    const std::vector<std::string>& header);

// "v1", ..., "vp".
std::vector<std::string> variable_header(std::size_t p);

// Single-column file with header "y".
Vector read_vector_csv(const std::string& path);
void write_vector_csv_file(const std::string& path, const Vector& values, const std::string& name = "y");

}  // namespace knockforge
