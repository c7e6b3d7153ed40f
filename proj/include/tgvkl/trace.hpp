#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tgvkl/image_io.hpp"

namespace tgvkl {

/// Ordered rows of named real columns with a "# key=value" metadata header.
class RunTrace {
 public:
  RunTrace() = default;
  explicit RunTrace(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }
  [[nodiscard]] const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
  [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }

  void add_row(std::vector<double> row) {
    if (row.size() != columns_.size()) {
      throw std::invalid_argument("RunTrace: row has " + std::to_string(row.size()) +
                                  " values for " + std::to_string(columns_.size()) + " columns");
    }
    rows_.push_back(std::move(row));
  }

  void set_metadata(const std::string& key, const std::string& value) {
    for (auto& kv : metadata_) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    metadata_.emplace_back(key, value);
  }

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& metadata() const {
    return metadata_;
  }

  [[nodiscard]] std::size_t column_index(std::string_view name) const {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (columns_[c] == name) return c;
    }
    throw std::out_of_range("RunTrace: no column " + std::string(name));
  }

  [[nodiscard]] double at(std::size_t row, std::string_view column) const {
    return rows_.at(row).at(column_index(column));
  }

  [[nodiscard]] std::vector<double> column(std::string_view name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r[c]);
    return out;
  }

  void append(const RunTrace& other) {
    if (other.columns_ != columns_) throw std::invalid_argument("RunTrace: column mismatch");
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
  }

  [[nodiscard]] std::string csv() const {
    std::string out;
    for (const auto& [k, v] : metadata_) out += "# " + k + "=" + v + "\n";
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (c > 0) out += ',';
      out += columns_[c];
    }
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c > 0) out += ',';
        out += format_double(r[c]);
      }
      out += '\n';
    }
    return out;
  }

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << csv();
    if (!out) throw IoError("write failed for " + path.string());
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::pair<std::string, std::string>> metadata_;
};

/// 64-bit FNV-1a, used to fingerprint effective configurations.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace tgvkl
