#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ruleids {

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

inline bool test_bit(std::span<const Word> row, std::size_t col) {
  return (row[col / kWordBits] >> (col % kWordBits)) & 1u;
}

inline void set_bit(std::span<Word> row, std::size_t col) {
  row[col / kWordBits] |= Word{1} << (col % kWordBits);
}

// Row-major N x m matrix of 0/1 entries, each row packed into 64-bit words.
// Padding bits past the last column are always zero.
class BinaryFeatureMatrix {
 public:
  BinaryFeatureMatrix() = default;
  BinaryFeatureMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_(words_for(cols)), bits_(rows * stride_, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t words_per_row() const noexcept { return stride_; }

  bool test(std::size_t r, std::size_t c) const { return test_bit(row(r), c); }
  void set(std::size_t r, std::size_t c) { set_bit(row(r), c); }

  std::span<const Word> row(std::size_t r) const { return {bits_.data() + r * stride_, stride_}; }
  std::span<Word> row(std::size_t r) { return {bits_.data() + r * stride_, stride_}; }

  std::size_t row_count(std::size_t r) const;
  std::size_t column_count(std::size_t c) const;

  // Row r as one byte per column.
  std::vector<std::uint8_t> row_bytes(std::size_t r) const;
  Eigen::MatrixXd to_dense() const;

  friend bool operator==(const BinaryFeatureMatrix&, const BinaryFeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t stride_ = 0;
  std::vector<Word> bits_;
};

}  // namespace ruleids
