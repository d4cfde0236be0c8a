#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ruleids {

enum class SourceFormat { kdd, apache, csv };

std::string_view to_string(SourceFormat format);
// Throws std::invalid_argument for anything but "kdd", "apache", "csv".
SourceFormat parse_source_format(std::string_view name);

// One traffic sample. Field names live on the owning Dataset; the value
// vectors here follow Dataset::continuous_names / categorical_names.
struct Record {
  std::vector<double> continuous;
  std::vector<std::string> categorical;
  std::optional<std::string> text;
  // Ground truth, carried for evaluation only.
  std::optional<std::string> label;
};

struct Dataset {
  SourceFormat format = SourceFormat::csv;
  std::vector<std::string> continuous_names;
  std::vector<std::string> categorical_names;
  std::vector<Record> records;
  // Lines dropped as malformed during a tolerant (Apache) load.
  std::size_t skipped_lines = 0;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  bool has_text() const;
  // True when every record carries a label.
  bool has_labels() const;
  // Continuous names followed by categorical names.
  std::vector<std::string> field_names() const;
};

// --- KDD Cup 99 ----------------------------------------------------------

namespace kdd {

inline constexpr std::size_t kFeatureCount = 41;

// The 41 feature names in file order.
std::span<const std::string_view> feature_names();
// True for the seven fields parsed as tokens rather than reals.
bool is_categorical(std::size_t field);
// Rate fields are written with two decimals in the original files.
bool is_rate(std::size_t field);

std::vector<std::string> continuous_names();
std::vector<std::string> categorical_names();

}  // namespace kdd

// Parses one comma-separated KDD line: 41 features plus an optional label.
// A trailing '.' on the label is stripped. line_no is only used in errors.
Record parse_kdd_record(std::string_view line, std::size_t line_no = 0);

// Inverse of parse_kdd_record, in the KDD token conventions (integers as
// integers, rates with two decimals, label with its trailing '.').
std::string format_kdd_record(const Record& record);

// --- Apache combined log ---------------------------------------------------

struct ApacheOptions {
  // Append the user-agent string to the request text.
  bool include_user_agent = false;
};

struct ApacheEntry {
  std::string host;
  std::string timestamp;
  std::string request;
  int status = 0;
  std::string referer;
  std::string user_agent;
};

ApacheEntry parse_apache_entry(std::string_view line, std::size_t line_no = 0);
Record parse_apache_line(std::string_view line, const ApacheOptions& options = {},
                         std::size_t line_no = 0);

// --- Generic CSV -----------------------------------------------------------

// Fixes which header columns are continuous and which categorical. Without
// a layout, a column is continuous iff every value parses as a finite real.
struct CsvLayout {
  std::vector<std::string> continuous;
  std::vector<std::string> categorical;
};

struct CsvOptions {
  std::string label_column = "label";
  char delimiter = ',';
  std::optional<CsvLayout> layout;
};

// Splits one delimited line; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

// Record-at-a-time parsing of CSV rows against a fixed layout, for streams
// too large to load whole.
class CsvRowParser {
 public:
  // Throws ParseError when the header lacks a layout column.
  CsvRowParser(std::string_view header_line, const CsvLayout& layout, const CsvOptions& options = {});

  std::size_t field_count() const noexcept { return n_fields_; }
  Record parse(std::string_view line, std::size_t line_no = 0) const;

 private:
  char delimiter_;
  std::size_t n_fields_ = 0;
  std::vector<std::string> header_;
  std::vector<std::size_t> continuous_;
  std::vector<std::size_t> categorical_;
  std::optional<std::size_t> label_;
};

// --- Bulk loading ----------------------------------------------------------

struct LoadOptions {
  // Keep a uniform random subsample of this many records.
  std::optional<std::size_t> limit;
  std::uint64_t seed = 0;
  ApacheOptions apache;
  CsvOptions csv;
};

Dataset read_dataset(std::istream& in, SourceFormat format, const LoadOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, SourceFormat format,
                     const LoadOptions& options = {});

// First `count` entries of a seeded Fisher-Yates shuffle of [0, population).
std::vector<std::size_t> shuffled_prefix(std::size_t population, std::size_t count,
                                         std::uint64_t seed);

// `count` distinct indices drawn uniformly from [0, population), returned in
// ascending order. Deterministic for a given seed.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        std::uint64_t seed);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

// Disjoint seeded train/test samples from one dataset.
struct DatasetSplit {
  Dataset train;
  Dataset test;
};
DatasetSplit split_dataset(const Dataset& data, std::size_t train_size, std::size_t test_size,
                           std::uint64_t seed);

}  // namespace ruleids
