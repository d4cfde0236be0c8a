#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ruleids/bit_matrix.hpp"
#include "ruleids/ingest.hpp"

namespace ruleids {

struct FeatureConfig {
  int n_bins = 10;
  int ngram_n = 2;
};

// Equal-width binning of one continuous field. A constant field gets a
// single degenerate bin with edges {min, max}.
struct ContinuousBinning {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  int n_bins = 0;
  std::vector<double> edges;  // n_bins + 1 entries

  bool degenerate() const noexcept { return n_bins == 1; }
};

struct CategoryVocabulary {
  std::string name;
  std::vector<std::string> categories;  // first-appearance order
};

struct NgramVocabulary {
  int n = 2;
  std::vector<std::string> grams;  // first-appearance order
};

enum class ColumnKind { bin, category, ngram };

std::string_view to_string(ColumnKind kind);

// One binary column of the feature matrix. `value` is the 0-based bin,
// category, or n-gram index within `field`.
struct Column {
  ColumnKind kind = ColumnKind::bin;
  std::size_t field = 0;
  std::size_t value = 0;
  std::string name;

  friend bool operator==(const Column&, const Column&) = default;
};

struct FeatureSchema {
  SourceFormat format = SourceFormat::csv;
  std::vector<ContinuousBinning> continuous;
  std::vector<CategoryVocabulary> categorical;
  std::optional<NgramVocabulary> ngram;
  // Retained columns in matrix order.
  std::vector<Column> columns;
  // Candidate columns that were all zero on the training data.
  std::vector<std::string> dropped_columns;

  std::size_t column_count() const noexcept { return columns.size(); }
  std::vector<std::string> column_names() const;
  std::uint64_t fingerprint() const;
  // Field layout for parsing further CSV input against this schema.
  CsvLayout csv_layout() const;
};

// FNV-1a over the newline-terminated names.
std::uint64_t fingerprint_of(std::span<const std::string> column_names);
std::string fingerprint_hex(std::uint64_t fingerprint);

// 1-based bin of `value`: bins are [e_k, e_{k+1}), the last one closed at
// max, and values outside [min, max] clamp to the outer bins.
int bin_index(double value, std::span<const double> edges);

std::vector<double> equal_width_edges(double min, double max, int n_bins);

FeatureSchema fit_schema(const Dataset& train, const FeatureConfig& config);

// Distinct n-grams of `text` in first-appearance order; empty when the text
// is shorter than n.
std::vector<std::string> extract_ngrams(std::string_view text, int n);

// Occurrence counts of each vocabulary n-gram in `text`; n-grams outside the
// vocabulary are ignored.
std::vector<std::uint32_t> ngram_counts(std::string_view text, const NgramVocabulary& vocabulary);

// Schema compiled for encoding single records.
class Binarizer {
 public:
  explicit Binarizer(const FeatureSchema& schema);

  std::size_t cols() const noexcept { return cols_; }
  std::size_t words_per_row() const noexcept { return words_for(cols_); }

  // Overwrites `out` (words_per_row() words) with the record's bits. Returns
  // how many categorical values fell outside the training vocabulary.
  std::size_t encode(const Record& record, std::span<Word> out) const;

  // Column of each n-gram occurrence in `text`, -1 when not in the schema.
  template <typename Fn>
  void for_each_ngram_column(std::string_view text, Fn&& fn) const;

 private:
  std::size_t cols_ = 0;
  std::size_t n_continuous_ = 0;
  std::size_t n_categorical_ = 0;
  std::vector<std::vector<double>> edges_;
  std::vector<std::vector<int>> bin_columns_;
  std::vector<std::unordered_map<std::string, int>> category_columns_;
  int ngram_n_ = 0;
  std::unordered_map<std::string, int> ngram_columns_;
};

template <typename Fn>
void Binarizer::for_each_ngram_column(std::string_view text, Fn&& fn) const {
  if (ngram_n_ <= 0 || text.size() < static_cast<std::size_t>(ngram_n_)) return;
  std::string key;
  for (std::size_t i = 0; i + static_cast<std::size_t>(ngram_n_) <= text.size(); ++i) {
    key.assign(text.data() + i, static_cast<std::size_t>(ngram_n_));
    auto it = ngram_columns_.find(key);
    fn(it == ngram_columns_.end() ? -1 : it->second);
  }
}

// Throws ModelError when the dataset's fields differ from the schema's.
// Unseen categories leave their field all zero and are reported through
// log_warning.
BinaryFeatureMatrix binarize(const Dataset& data, const FeatureSchema& schema);

// Dense version of the feature matrix where n-gram columns hold occurrence
// counts instead of presence bits. Used as embedding input.
Eigen::MatrixXd count_feature_matrix(const Dataset& data, const FeatureSchema& schema);

// One-hot expansion of a table of 1-based bin ordinals (rows x fields),
// omitting columns that are never active. Column names are "<field>=<bin>".
struct OrdinalBinarization {
  BinaryFeatureMatrix matrix;
  std::vector<std::string> column_names;
};
OrdinalBinarization binarize_ordinals(std::span<const std::vector<int>> rows,
                                      std::span<const std::string> field_names, int n_bins);

std::string serialize_schema(const FeatureSchema& schema);
// Throws ParseError with the offending line number.
FeatureSchema parse_schema(std::string_view text);

// Percent-escapes bytes that cannot appear in a whitespace-separated token.
std::string escape_token(std::string_view raw);
std::string unescape_token(std::string_view escaped);

}  // namespace ruleids
