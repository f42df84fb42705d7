#pragma once

// Minimal CSV writer with fixed 17-significant-digit floats, so identical
// inputs give byte-identical files.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace iprep {

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <typename... Ts>
  void row(const Ts&... values) {
    if (sizeof...(Ts) != header_.size())
      throw std::invalid_argument("CsvTable: row width does not match header");
    std::vector<std::string> cells;
    cells.reserve(sizeof...(Ts));
    (cells.push_back(cell(values)), ...);
    rows_.push_back(std::move(cells));
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  void write(std::ostream& os) const {
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write(f);
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

 private:
  template <typename T>
  static std::string cell(const T& v) {
    if constexpr (std::is_floating_point_v<T>) return format_double(static_cast<double>(v));
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else return std::string(v);
  }

  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace iprep
