#include "nlf/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "nlf/errors.hpp"

namespace nlf {

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::cell(double v) {
  current_.push_back(format_number(v));
  return *this;
}

CsvTable& CsvTable::cell(long long v) {
  current_.push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::cell(bool v) {
  current_.push_back(v ? "1" : "0");
  return *this;
}

CsvTable& CsvTable::cell(const std::string& v) {
  current_.push_back(v);
  return *this;
}

void CsvTable::end_row() {
  if (current_.size() != header_.size())
    throw std::logic_error("CsvTable: row has " + std::to_string(current_.size()) +
                           " fields, header has " + std::to_string(header_.size()));
  rows_.push_back(std::move(current_));
  current_.clear();
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += r[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << str();
  if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace nlf
