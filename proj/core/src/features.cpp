#include "ruleids/features.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ruleids/error.hpp"
#include "ruleids/log.hpp"

namespace ruleids {
namespace {

std::string bin_column_name(const std::string& field, int bin) {
  return field + "=bin" + std::to_string(bin);
}

std::string real_to_string(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

ColumnKind parse_kind(std::string_view s, std::size_t line) {
  if (s == "bin") return ColumnKind::bin;
  if (s == "category") return ColumnKind::category;
  if (s == "ngram") return ColumnKind::ngram;
  throw ParseError("unknown column kind '" + std::string(s) + "'", line);
}

void check_fields(const Dataset& data, const FeatureSchema& schema) {
  bool ok = data.continuous_names.size() == schema.continuous.size() &&
            data.categorical_names.size() == schema.categorical.size() &&
            data.has_text() == schema.ngram.has_value();
  for (std::size_t i = 0; ok && i < schema.continuous.size(); ++i) {
    ok = data.continuous_names[i] == schema.continuous[i].name;
  }
  for (std::size_t i = 0; ok && i < schema.categorical.size(); ++i) {
    ok = data.categorical_names[i] == schema.categorical[i].name;
  }
  if (!ok) throw ModelError("dataset fields do not match the feature schema");
}

// Line-oriented reader for the schema file.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::vector<std::string> next(std::string_view expect_keyword) {
    if (pos_ >= text_.size()) throw ParseError("unexpected end of schema", line_ + 1);
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    std::string_view line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    std::vector<std::string> tokens;
    std::istringstream in{std::string(line)};
    for (std::string tok; in >> tok;) tokens.push_back(std::move(tok));
    if (tokens.empty() || tokens[0] != expect_keyword) {
      throw ParseError("expected '" + std::string(expect_keyword) + "'", line_);
    }
    return tokens;
  }

  std::size_t line() const noexcept { return line_; }
  bool done() const noexcept { return pos_ >= text_.size(); }

  std::size_t to_size(const std::string& s) const {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ParseError("expected a count, got '" + s + "'", line_);
    }
    return v;
  }

  double to_real(const std::string& s) const {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ParseError("expected a number, got '" + s + "'", line_);
    }
    return v;
  }

  void expect_arity(const std::vector<std::string>& tokens, std::size_t n) const {
    if (tokens.size() != n) throw ParseError("wrong number of tokens", line_);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::bin:
      return "bin";
    case ColumnKind::category:
      return "category";
    case ColumnKind::ngram:
      return "ngram";
  }
  return "bin";
}

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

std::uint64_t FeatureSchema::fingerprint() const {
  auto names = column_names();
  return fingerprint_of(names);
}

CsvLayout FeatureSchema::csv_layout() const {
  CsvLayout layout;
  for (const auto& f : continuous) layout.continuous.push_back(f.name);
  for (const auto& f : categorical) layout.categorical.push_back(f.name);
  return layout;
}

std::uint64_t fingerprint_of(std::span<const std::string> column_names) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (const auto& name : column_names) {
    for (unsigned char ch : name) mix(ch);
    mix('\n');
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

std::vector<double> equal_width_edges(double min, double max, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("n_bins must be positive");
  std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
  double width = (max - min) / n_bins;
  for (int i = 0; i < n_bins; ++i) edges[static_cast<std::size_t>(i)] = min + width * i;
  edges.back() = max;
  return edges;
}

int bin_index(double value, std::span<const double> edges) {
  if (edges.size() < 2) throw std::invalid_argument("bin edges need at least two entries");
  const int n_bins = static_cast<int>(edges.size()) - 1;
  if (n_bins == 1) return 1;
  // Interior edges e_1 .. e_{n-1}; the bin is one plus how many are <= value.
  auto interior = edges.subspan(1, edges.size() - 2);
  auto it = std::upper_bound(interior.begin(), interior.end(), value);
  return static_cast<int>(it - interior.begin()) + 1;
}

std::vector<std::string> extract_ngrams(std::string_view text, int n) {
  if (n < 1) throw std::invalid_argument("n-gram size must be at least 1");
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= text.size(); ++i) {
    std::string gram(text.substr(i, un));
    if (seen.insert(gram).second) out.push_back(std::move(gram));
  }
  return out;
}

std::vector<std::uint32_t> ngram_counts(std::string_view text, const NgramVocabulary& vocabulary) {
  if (vocabulary.n < 1) throw std::invalid_argument("n-gram size must be at least 1");
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < vocabulary.grams.size(); ++i) index.emplace(vocabulary.grams[i], i);
  std::vector<std::uint32_t> counts(vocabulary.grams.size(), 0);
  const auto un = static_cast<std::size_t>(vocabulary.n);
  for (std::size_t i = 0; i + un <= text.size(); ++i) {
    auto it = index.find(text.substr(i, un));
    if (it != index.end()) ++counts[it->second];
  }
  return counts;
}

FeatureSchema fit_schema(const Dataset& train, const FeatureConfig& config) {
  if (train.empty()) throw TrainError("cannot fit a feature schema on an empty dataset");
  if (config.n_bins < 2) throw TrainError("n_bins must be at least 2");

  FeatureSchema schema;
  schema.format = train.format;

  for (std::size_t f = 0; f < train.continuous_names.size(); ++f) {
    ContinuousBinning b;
    b.name = train.continuous_names[f];
    b.min = b.max = train.records.front().continuous.at(f);
    for (const auto& r : train.records) {
      b.min = std::min(b.min, r.continuous.at(f));
      b.max = std::max(b.max, r.continuous.at(f));
    }
    b.n_bins = b.min == b.max ? 1 : config.n_bins;
    b.edges = equal_width_edges(b.min, b.max, b.n_bins);
    schema.continuous.push_back(std::move(b));
  }

  for (std::size_t f = 0; f < train.categorical_names.size(); ++f) {
    CategoryVocabulary v;
    v.name = train.categorical_names[f];
    std::unordered_set<std::string> seen;
    for (const auto& r : train.records) {
      const auto& token = r.categorical.at(f);
      if (seen.insert(token).second) v.categories.push_back(token);
    }
    schema.categorical.push_back(std::move(v));
  }

  if (train.has_text()) {
    if (config.ngram_n < 1) throw TrainError("ngram_n must be at least 1");
    NgramVocabulary vocab;
    vocab.n = config.ngram_n;
    std::unordered_set<std::string> seen;
    for (const auto& r : train.records) {
      for (auto& g : extract_ngrams(r.text.value_or(""), vocab.n)) {
        if (seen.insert(g).second) vocab.grams.push_back(std::move(g));
      }
    }
    schema.ngram = std::move(vocab);
  }

  // Candidate columns, then keep the ones active on some training row.
  for (std::size_t f = 0; f < schema.continuous.size(); ++f) {
    const auto& b = schema.continuous[f];
    std::vector<std::size_t> occupancy(static_cast<std::size_t>(b.n_bins), 0);
    for (const auto& r : train.records) {
      ++occupancy[static_cast<std::size_t>(bin_index(r.continuous[f], b.edges) - 1)];
    }
    for (int k = 0; k < b.n_bins; ++k) {
      std::string name = bin_column_name(escape_token(b.name), k + 1);
      if (occupancy[static_cast<std::size_t>(k)] == 0 || b.degenerate()) {
        schema.dropped_columns.push_back(std::move(name));
      } else {
        schema.columns.push_back({ColumnKind::bin, f, static_cast<std::size_t>(k), std::move(name)});
      }
    }
  }
  for (std::size_t f = 0; f < schema.categorical.size(); ++f) {
    const auto& v = schema.categorical[f];
    for (std::size_t k = 0; k < v.categories.size(); ++k) {
      schema.columns.push_back(
          {ColumnKind::category, f, k, escape_token(v.name) + "=" + escape_token(v.categories[k])});
    }
  }
  if (schema.ngram) {
    for (std::size_t k = 0; k < schema.ngram->grams.size(); ++k) {
      schema.columns.push_back({ColumnKind::ngram, 0, k, "ngram:" + escape_token(schema.ngram->grams[k])});
    }
  }
  if (schema.columns.empty()) throw TrainError("every feature column is constant on the training data");
  return schema;
}

Binarizer::Binarizer(const FeatureSchema& schema)
    : cols_(schema.columns.size()),
      n_continuous_(schema.continuous.size()),
      n_categorical_(schema.categorical.size()) {
  for (const auto& b : schema.continuous) {
    edges_.push_back(b.edges);
    bin_columns_.emplace_back(static_cast<std::size_t>(b.n_bins), -1);
  }
  category_columns_.resize(schema.categorical.size());
  for (std::size_t f = 0; f < schema.categorical.size(); ++f) {
    for (const auto& c : schema.categorical[f].categories) category_columns_[f].emplace(c, -1);
  }
  if (schema.ngram) ngram_n_ = schema.ngram->n;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const auto& col = schema.columns[c];
    const int ci = static_cast<int>(c);
    switch (col.kind) {
      case ColumnKind::bin:
        bin_columns_.at(col.field).at(col.value) = ci;
        break;
      case ColumnKind::category:
        category_columns_.at(col.field)[schema.categorical.at(col.field).categories.at(col.value)] = ci;
        break;
      case ColumnKind::ngram:
        ngram_columns_[schema.ngram.value().grams.at(col.value)] = ci;
        break;
    }
  }
}

std::size_t Binarizer::encode(const Record& record, std::span<Word> out) const {
  if (record.continuous.size() != n_continuous_ || record.categorical.size() != n_categorical_) {
    throw ModelError("record fields do not match the feature schema");
  }
  std::fill(out.begin(), out.end(), Word{0});
  for (std::size_t f = 0; f < n_continuous_; ++f) {
    int bin = bin_index(record.continuous[f], edges_[f]);
    int col = bin_columns_[f][static_cast<std::size_t>(bin - 1)];
    if (col >= 0) set_bit(out, static_cast<std::size_t>(col));
  }
  std::size_t unseen = 0;
  for (std::size_t f = 0; f < n_categorical_; ++f) {
    auto it = category_columns_[f].find(record.categorical[f]);
    if (it == category_columns_[f].end()) {
      ++unseen;
    } else if (it->second >= 0) {
      set_bit(out, static_cast<std::size_t>(it->second));
    }
  }
  if (record.text) {
    for_each_ngram_column(*record.text, [&](int col) {
      if (col >= 0) set_bit(out, static_cast<std::size_t>(col));
    });
  }
  return unseen;
}

BinaryFeatureMatrix binarize(const Dataset& data, const FeatureSchema& schema) {
  check_fields(data, schema);
  Binarizer encoder(schema);
  BinaryFeatureMatrix m(data.size(), schema.column_count());
  std::vector<std::size_t> unseen_per_field(schema.categorical.size(), 0);
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (encoder.encode(data.records[r], m.row(r)) > 0) {
      for (std::size_t f = 0; f < schema.categorical.size(); ++f) {
        const auto& cats = schema.categorical[f].categories;
        if (std::find(cats.begin(), cats.end(), data.records[r].categorical[f]) == cats.end()) {
          ++unseen_per_field[f];
        }
      }
    }
  }
  for (std::size_t f = 0; f < unseen_per_field.size(); ++f) {
    if (unseen_per_field[f] > 0) {
      log_warning("field '" + schema.categorical[f].name + "': " + std::to_string(unseen_per_field[f]) +
                  " record(s) with categories unseen in training");
    }
  }
  return m;
}

Eigen::MatrixXd count_feature_matrix(const Dataset& data, const FeatureSchema& schema) {
  Eigen::MatrixXd dense = binarize(data, schema).to_dense();
  if (!schema.ngram) return dense;
  Binarizer encoder(schema);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& text = data.records[r].text;
    if (!text) continue;
    const auto row = static_cast<Eigen::Index>(r);
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      if (schema.columns[c].kind == ColumnKind::ngram) dense(row, static_cast<Eigen::Index>(c)) = 0.0;
    }
    encoder.for_each_ngram_column(*text, [&](int col) {
      if (col >= 0) dense(row, col) += 1.0;
    });
  }
  return dense;
}

OrdinalBinarization binarize_ordinals(std::span<const std::vector<int>> rows,
                                      std::span<const std::string> field_names, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("n_bins must be positive");
  const std::size_t n_fields = field_names.size();
  std::vector<std::vector<bool>> active(n_fields, std::vector<bool>(static_cast<std::size_t>(n_bins), false));
  for (const auto& row : rows) {
    if (row.size() != n_fields) throw std::invalid_argument("ordinal row has wrong field count");
    for (std::size_t f = 0; f < n_fields; ++f) {
      if (row[f] < 1 || row[f] > n_bins) throw std::invalid_argument("bin ordinal out of range");
      active[f][static_cast<std::size_t>(row[f] - 1)] = true;
    }
  }
  OrdinalBinarization out;
  std::vector<std::vector<int>> column_of(n_fields, std::vector<int>(static_cast<std::size_t>(n_bins), -1));
  for (std::size_t f = 0; f < n_fields; ++f) {
    for (int k = 0; k < n_bins; ++k) {
      if (!active[f][static_cast<std::size_t>(k)]) continue;
      column_of[f][static_cast<std::size_t>(k)] = static_cast<int>(out.column_names.size());
      out.column_names.push_back(field_names[f] + "=" + std::to_string(k + 1));
    }
  }
  out.matrix = BinaryFeatureMatrix(rows.size(), out.column_names.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t f = 0; f < n_fields; ++f) {
      out.matrix.set(r, static_cast<std::size_t>(column_of[f][static_cast<std::size_t>(rows[r][f] - 1)]));
    }
  }
  return out;
}

std::string escape_token(std::string_view raw) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size());
  for (unsigned char ch : raw) {
    if (ch <= 0x20 || ch >= 0x7f || ch == '%') {
      out += '%';
      out += kHex[ch >> 4];
      out += kHex[ch & 0xf];
    } else {
      out += static_cast<char>(ch);
    }
  }
  if (out.empty()) out = "%";  // a lone '%' stands for the empty string
  return out;
}

std::string unescape_token(std::string_view escaped) {
  if (escaped == "%") return {};
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] == '%') {
      if (i + 2 >= escaped.size()) {
        throw std::invalid_argument("truncated escape in '" + std::string(escaped) + "'");
      }
      int hi = hex(escaped[i + 1]);
      int lo = hex(escaped[i + 2]);
      if (hi < 0 || lo < 0) throw std::invalid_argument("bad escape in '" + std::string(escaped) + "'");
      out += static_cast<char>(hi * 16 + lo);
      i += 2;
    } else {
      out += escaped[i];
    }
  }
  return out;
}

std::string serialize_schema(const FeatureSchema& schema) {
  std::ostringstream out;
  out << "SCHEMA v1\n";
  out << "format " << to_string(schema.format) << '\n';
  out << "continuous " << schema.continuous.size() << '\n';
  for (const auto& b : schema.continuous) {
    out << "field " << escape_token(b.name) << ' ' << b.n_bins;
    for (double e : b.edges) out << ' ' << real_to_string(e);
    out << '\n';
  }
  out << "categorical " << schema.categorical.size() << '\n';
  for (const auto& v : schema.categorical) {
    out << "field " << escape_token(v.name) << ' ' << v.categories.size();
    for (const auto& c : v.categories) out << ' ' << escape_token(c);
    out << '\n';
  }
  if (schema.ngram) {
    out << "ngram " << schema.ngram->n << ' ' << schema.ngram->grams.size() << '\n';
    for (const auto& g : schema.ngram->grams) out << "gram " << escape_token(g) << '\n';
  } else {
    out << "ngram 0 0\n";
  }
  out << "columns " << schema.columns.size() << '\n';
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    const auto& c = schema.columns[i];
    out << "col " << i << ' ' << to_string(c.kind) << ' ' << c.field << ' ' << c.value << ' ' << c.name << '\n';
  }
  out << "dropped " << schema.dropped_columns.size() << '\n';
  for (const auto& d : schema.dropped_columns) out << "drop " << d << '\n';
  return out.str();
}

FeatureSchema parse_schema(std::string_view text) {
  LineReader in(text);
  FeatureSchema schema;
  auto header = in.next("SCHEMA");
  if (header.size() != 2 || header[1] != "v1") throw ParseError("unsupported schema version", in.line());

  auto fmt = in.next("format");
  in.expect_arity(fmt, 2);
  try {
    schema.format = parse_source_format(fmt[1]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), in.line());
  }

  auto unescape = [&](const std::string& s) {
    try {
      return unescape_token(s);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), in.line());
    }
  };

  auto cont = in.next("continuous");
  in.expect_arity(cont, 2);
  for (std::size_t i = 0, n = in.to_size(cont[1]); i < n; ++i) {
    auto t = in.next("field");
    if (t.size() < 3) throw ParseError("truncated field line", in.line());
    ContinuousBinning b;
    b.name = unescape(t[1]);
    b.n_bins = static_cast<int>(in.to_size(t[2]));
    in.expect_arity(t, 3 + static_cast<std::size_t>(b.n_bins) + 1);
    for (std::size_t k = 3; k < t.size(); ++k) b.edges.push_back(in.to_real(t[k]));
    if (b.n_bins < 1) throw ParseError("field needs at least one bin", in.line());
    for (std::size_t k = 1; k < b.edges.size(); ++k) {
      if (!(b.edges[k] > b.edges[k - 1]) && !(b.n_bins == 1 && b.edges[k] == b.edges[k - 1])) {
        throw ParseError("bin edges must increase", in.line());
      }
    }
    b.min = b.edges.front();
    b.max = b.edges.back();
    schema.continuous.push_back(std::move(b));
  }

  auto cat = in.next("categorical");
  in.expect_arity(cat, 2);
  for (std::size_t i = 0, n = in.to_size(cat[1]); i < n; ++i) {
    auto t = in.next("field");
    if (t.size() < 3) throw ParseError("truncated field line", in.line());
    CategoryVocabulary v;
    v.name = unescape(t[1]);
    in.expect_arity(t, 3 + in.to_size(t[2]));
    for (std::size_t k = 3; k < t.size(); ++k) v.categories.push_back(unescape(t[k]));
    schema.categorical.push_back(std::move(v));
  }

  auto ng = in.next("ngram");
  in.expect_arity(ng, 3);
  if (std::size_t n = in.to_size(ng[1]); n > 0) {
    NgramVocabulary vocab;
    vocab.n = static_cast<int>(n);
    for (std::size_t i = 0, count = in.to_size(ng[2]); i < count; ++i) {
      auto t = in.next("gram");
      in.expect_arity(t, 2);
      vocab.grams.push_back(unescape(t[1]));
    }
    schema.ngram = std::move(vocab);
  }

  auto cols = in.next("columns");
  in.expect_arity(cols, 2);
  for (std::size_t i = 0, n = in.to_size(cols[1]); i < n; ++i) {
    auto t = in.next("col");
    in.expect_arity(t, 6);
    if (in.to_size(t[1]) != i) throw ParseError("column index out of order", in.line());
    Column c{parse_kind(t[2], in.line()), in.to_size(t[3]), in.to_size(t[4]), t[5]};
    bool valid = false;
    switch (c.kind) {
      case ColumnKind::bin:
        valid = c.field < schema.continuous.size() &&
                c.value < static_cast<std::size_t>(schema.continuous[c.field].n_bins);
        break;
      case ColumnKind::category:
        valid = c.field < schema.categorical.size() && c.value < schema.categorical[c.field].categories.size();
        break;
      case ColumnKind::ngram:
        valid = schema.ngram && c.field == 0 && c.value < schema.ngram->grams.size();
        break;
    }
    if (!valid) throw ParseError("column refers to an unknown field or value", in.line());
    schema.columns.push_back(std::move(c));
  }

  auto dropped = in.next("dropped");
  in.expect_arity(dropped, 2);
  for (std::size_t i = 0, n = in.to_size(dropped[1]); i < n; ++i) {
    auto t = in.next("drop");
    in.expect_arity(t, 2);
    schema.dropped_columns.push_back(t[1]);
  }
  if (!in.done()) throw ParseError("trailing content after schema", in.line() + 1);
  return schema;
}

}  // namespace ruleids
