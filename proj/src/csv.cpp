#include "knockforge/csv.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "knockforge/errors.hpp"

namespace knockforge {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::string& name, std::size_t line) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ContractViolation(name + ": line " + std::to_string(line) + ": not a number: '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

CsvMatrix parse_csv(std::istream& in, const std::string& name) {
  CsvMatrix out;
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  out.header = split(line);
  const std::size_t cols = out.header.size();
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != cols) {
      throw ContractViolation(name + ": line " + std::to_string(line_number) + " has " +
                              std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(cols));
    }
    for (const std::string& f : fields) data.push_back(parse_number(f, name, line_number));
    ++rows;
  }
  out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * cols + j];
    }
  }
  return out;
}

CsvMatrix read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return parse_csv(in, path);
}

void write_csv(std::ostream& out, const Matrix& values, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Matrix& values, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(out, values, header);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<std::string> variable_header(std::size_t p) {
  std::vector<std::string> header;
  for (std::size_t j = 1; j <= p; ++j) header.push_back("v" + std::to_string(j));
  return header;
}

Vector read_vector_csv(const std::string& path) {
  const CsvMatrix m = read_csv(path);
  if (m.values.cols() != 1) throw ContractViolation(path + ": expected a single column");
  return m.values.col(0);
}

void write_vector_csv_file(const std::string& path, const Vector& values, const std::string& name) {
  write_csv_file(path, Matrix(values), {name});
}

}  // namespace knockforge
