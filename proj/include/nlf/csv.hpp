#ifndef NLF_CSV_HPP
#define NLF_CSV_HPP

// Plain CSV tables: one header row, numbers printed with 17 significant
// digits, NaN written as an empty field.

#include <string>
#include <vector>

namespace nlf {

std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& cell(double v);
  CsvTable& cell(long long v);
  CsvTable& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvTable& cell(bool v);
  CsvTable& cell(const std::string& v);
  CsvTable& cell(const char* v) { return cell(std::string(v)); }
  /// Closes the current row; throws std::logic_error on a column-count mismatch.
  void end_row();

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  /// Throws IoError when the file cannot be written.
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> current_;
};

}  // namespace nlf

#endif  // NLF_CSV_HPP
