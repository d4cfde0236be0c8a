#include "ruleids/bit_matrix.hpp"

namespace ruleids {

std::size_t BinaryFeatureMatrix::row_count(std::size_t r) const {
  std::size_t n = 0;
  for (Word w : row(r)) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t BinaryFeatureMatrix::column_count(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows_; ++r) n += test(r, c) ? 1 : 0;
  return n;
}

std::vector<std::uint8_t> BinaryFeatureMatrix::row_bytes(std::size_t r) const {
  std::vector<std::uint8_t> out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = test(r, c) ? 1 : 0;
  return out;
}

Eigen::MatrixXd BinaryFeatureMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_),
                                              static_cast<Eigen::Index>(cols_));
  for (std::size_t r = 0; r < rows_; ++r) {
    auto words = row(r);
    for (std::size_t w = 0; w < stride_; ++w) {
      Word bits = words[w];
      while (bits) {
        int b = std::countr_zero(bits);
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(w * kWordBits + b)) = 1.0;
        bits &= bits - 1;
      }
    }
  }
  return out;
}

}  // namespace ruleids
