#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ruleids/error.hpp"
#include "ruleids/features.hpp"
#include "ruleids/log.hpp"
#include "support/synthetic.hpp"

namespace ruleids {
namespace {

Dataset iris() { return load_dataset(std::string(RULEIDS_DATA_DIR) + "/iris.csv", SourceFormat::csv); }

Dataset numeric(std::vector<std::vector<double>> rows, std::vector<std::string> names) {
  Dataset d;
  d.continuous_names = std::move(names);
  for (auto& r : rows) d.records.push_back(Record{std::move(r), {}, {}, {}});
  return d;
}

// Captures log_warning output for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  LogSink previous;
  WarningCapture() {
    previous = set_log_sink([this](LogLevel level, std::string_view msg) {
      if (level == LogLevel::warning) messages.emplace_back(msg);
    });
  }
  ~WarningCapture() { set_log_sink(previous); }
};

TEST(Binning, IrisPetalWidthEdges) {
  FeatureSchema s = fit_schema(iris(), {3, 2});
  const auto& pw = s.continuous.at(3);
  EXPECT_EQ(pw.name, "petal_width");
  ASSERT_EQ(pw.edges.size(), 4u);
  const double expected[] = {0.1, 0.9, 1.7, 2.5};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(pw.edges[static_cast<std::size_t>(i)], expected[i], 1e-12);
}

TEST(Binning, BinIndexExamples) {
  const std::vector<double> edges = {0.1, 0.9, 1.7, 2.5};
  EXPECT_EQ(bin_index(0.5, edges), 1);
  EXPECT_EQ(bin_index(2.5, edges), 3);   // max lands in the last bin
  EXPECT_EQ(bin_index(3.0, edges), 3);   // clamped above
  EXPECT_EQ(bin_index(-4.0, edges), 1);  // clamped below
  EXPECT_EQ(bin_index(0.9, edges), 2);   // left-closed
  EXPECT_EQ(bin_index(0.1, edges), 1);
}

TEST(Binning, MatchesFloorFormulaInsideRange) {
  // Oracle: bin = floor((v - min) / width) + 1, capped at n.
  const double lo = -3.0, hi = 7.0;
  const int n = 10;
  auto edges = equal_width_edges(lo, hi, n);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(lo, hi);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng);
    const int expected = std::min(n, static_cast<int>(std::floor((v - lo) / ((hi - lo) / n))) + 1);
    EXPECT_EQ(bin_index(v, edges), expected) << v;
  }
}

TEST(Binning, EdgesStrictlyIncreasing) {
  auto e = equal_width_edges(1.0, 6.9, 10);
  ASSERT_EQ(e.size(), 11u);
  EXPECT_EQ(e.front(), 1.0);
  EXPECT_EQ(e.back(), 6.9);
  EXPECT_TRUE(std::adjacent_find(e.begin(), e.end(), std::greater_equal<>()) == e.end());
}

TEST(FitSchema, ConstantFieldDropped) {
  Dataset d = numeric({{1, 5}, {2, 5}, {3, 5}}, {"a", "flat"});
  FeatureSchema s = fit_schema(d, {3, 2});
  EXPECT_TRUE(s.continuous[1].degenerate());
  for (const auto& c : s.columns) EXPECT_NE(c.field, 1u) << c.name;
  EXPECT_NE(std::find(s.dropped_columns.begin(), s.dropped_columns.end(), "flat=bin1"), s.dropped_columns.end());
}

TEST(FitSchema, Errors) {
  Dataset empty;
  EXPECT_THROW(fit_schema(empty, {3, 2}), TrainError);
  Dataset d = numeric({{1}, {2}}, {"a"});
  EXPECT_THROW(fit_schema(d, {1, 2}), TrainError);
  Dataset flat = numeric({{1}, {1}}, {"a"});
  EXPECT_THROW(fit_schema(flat, {3, 2}), TrainError);
}

TEST(FitSchema, CategoriesInFirstAppearanceOrder) {
  Dataset d;
  d.categorical_names = {"proto"};
  for (const char* t : {"udp", "tcp", "udp", "icmp"}) d.records.push_back(Record{{}, {t}, {}, {}});
  FeatureSchema s = fit_schema(d, {3, 2});
  EXPECT_EQ(s.categorical[0].categories, (std::vector<std::string>{"udp", "tcp", "icmp"}));
  EXPECT_EQ(s.column_names(), (std::vector<std::string>{"proto=udp", "proto=tcp", "proto=icmp"}));
}

TEST(Binarize, IrisIs150By12) {
  Dataset d = iris();
  FeatureSchema s = fit_schema(d, {3, 2});
  BinaryFeatureMatrix m = binarize(d, s);
  EXPECT_EQ(m.rows(), 150u);
  EXPECT_EQ(m.cols(), 12u);
}

TEST(Binarize, WorkedOrdinalExample) {
  const std::vector<std::vector<int>> rows = {{1, 2, 1}, {3, 2, 3}, {2, 1, 1}};
  const std::vector<std::string> fields = {"f1", "f2", "f3"};
  auto out = binarize_ordinals(rows, fields, 3);
  const std::vector<std::string> names = {"f1=1", "f1=2", "f1=3", "f2=1", "f2=2", "f3=1", "f3=3"};
  EXPECT_EQ(out.column_names, names);
  const int table[3][7] = {{1, 0, 0, 0, 1, 1, 0}, {0, 0, 1, 0, 1, 0, 1}, {0, 1, 0, 1, 0, 1, 0}};
  ASSERT_EQ(out.matrix.rows(), 3u);
  ASSERT_EQ(out.matrix.cols(), 7u);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(out.matrix.test(r, c), table[r][c] == 1) << r << "," << c;
  }
}

TEST(Binarize, UnseenCategoryIsAllZeroWithWarning) {
  Dataset train;
  train.categorical_names = {"proto"};
  train.continuous_names = {"x"};
  train.records.push_back(Record{{1.0}, {"tcp"}, {}, {}});
  train.records.push_back(Record{{2.0}, {"udp"}, {}, {}});
  FeatureSchema s = fit_schema(train, {2, 2});
  Dataset test = train;
  test.records = {Record{{1.5}, {"icmp"}, {}, {}}};
  WarningCapture capture;
  BinaryFeatureMatrix m = binarize(test, s);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (s.columns[c].kind == ColumnKind::category) EXPECT_FALSE(m.test(0, c));
  }
  ASSERT_FALSE(capture.messages.empty());
  EXPECT_NE(capture.messages.front().find("proto"), std::string::npos);
}

TEST(Binarize, FieldMismatchIsModelError) {
  FeatureSchema s = fit_schema(iris(), {3, 2});
  Dataset other = numeric({{1, 2}}, {"a", "b"});
  EXPECT_THROW(binarize(other, s), ModelError);
}

TEST(Binarize, OneActiveBinPerContinuousFieldIncludingClampedTestRows) {
  Dataset train = testing::kdd_dataset(600, 21);
  FeatureSchema s = fit_schema(train, {10, 2});
  Dataset test = testing::kdd_dataset(600, 22);
  for (auto& r : test.records) r.continuous[1] *= 3.0;  // push src_bytes beyond the training range
  for (const Dataset* d : {&train, &test}) {
    BinaryFeatureMatrix m = binarize(*d, s);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      std::vector<int> per_field(s.continuous.size(), 0);
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (s.columns[c].kind == ColumnKind::bin && m.test(r, c)) ++per_field[s.columns[c].field];
      }
      for (std::size_t f = 0; f < per_field.size(); ++f) {
        // Degenerate fields have no retained column; test rows may land in a
        // bin that was empty in training and therefore dropped.
        if (d == &train) {
          EXPECT_EQ(per_field[f], s.continuous[f].degenerate() ? 0 : 1) << "row " << r << " field " << f;
        } else {
          EXPECT_LE(per_field[f], 1) << "row " << r << " field " << f;
        }
      }
    }
  }
}

TEST(Binarize, TrainingMatrixHasNoZeroColumns) {
  for (const Dataset& d : {iris(), testing::kdd_dataset(500, 3)}) {
    FeatureSchema s = fit_schema(d, {10, 2});
    BinaryFeatureMatrix m = binarize(d, s);
    for (std::size_t c = 0; c < m.cols(); ++c) EXPECT_GT(m.column_count(c), 0u) << s.columns[c].name;
  }
}

TEST(Ngrams, RequestBigramExamples) {
  EXPECT_EQ(extract_ngrams("anomaly", 2), (std::vector<std::string>{"an", "no", "om", "ma", "al", "ly"}));
  EXPECT_EQ(extract_ngrams("analysis", 2), (std::vector<std::string>{"an", "na", "al", "ly", "ys", "si", "is"}));
  EXPECT_TRUE(extract_ngrams("a", 2).empty());
}

TEST(Ngrams, BigramMatrixForTwoWords) {
  Dataset d;
  d.format = SourceFormat::apache;
  d.records = {Record{{}, {}, std::string("anomaly"), {}}, Record{{}, {}, std::string("analysis"), {}}};
  FeatureSchema s = fit_schema(d, {3, 2});
  ASSERT_TRUE(s.ngram.has_value());
  const std::vector<std::string> vocab = {"an", "no", "om", "ma", "al", "ly", "na", "ys", "si", "is"};
  EXPECT_EQ(s.ngram->grams, vocab);
  BinaryFeatureMatrix m = binarize(d, s);
  const int expected[2][10] = {{1, 1, 1, 1, 1, 1, 0, 0, 0, 0}, {1, 0, 0, 0, 1, 1, 1, 1, 1, 1}};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(m.test(r, c), expected[r][c] == 1);
  }
  Dataset short_text = d;
  short_text.records = {Record{{}, {}, std::string("a"), {}}};
  EXPECT_EQ(binarize(short_text, s).row_count(0), 0u);
}

TEST(Ngrams, CountsIgnoreOutOfVocabulary) {
  NgramVocabulary v{2, {"ab", "ba"}};
  EXPECT_EQ(ngram_counts("ababx", v), (std::vector<std::uint32_t>{2, 1}));
  EXPECT_EQ(ngram_counts("zz", v), (std::vector<std::uint32_t>{0, 0}));
}

TEST(Ngrams, CountMatrixHoldsCounts) {
  Dataset d;
  d.format = SourceFormat::apache;
  d.records = {Record{{}, {}, std::string("aaa"), {}}, Record{{}, {}, std::string("ab"), {}}};
  FeatureSchema s = fit_schema(d, {3, 2});
  Eigen::MatrixXd c = count_feature_matrix(d, s);
  EXPECT_EQ(c(0, 0), 2.0);  // "aa" twice
  EXPECT_EQ(c(1, 1), 1.0);
  EXPECT_EQ(binarize(d, s).to_dense(), (c.array() > 0).cast<double>().matrix());
}

TEST(Schema, SerializeParseRoundTrip) {
  std::vector<Dataset> sets = {iris(), testing::kdd_dataset(400, 8)};
  {
    std::istringstream in(testing::apache_log(80, 2));
    sets.push_back(read_dataset(in, SourceFormat::apache));
  }
  for (const Dataset& d : sets) {
    FeatureSchema s = fit_schema(d, {10, 2});
    const std::string text = serialize_schema(s);
    FeatureSchema back = parse_schema(text);
    EXPECT_EQ(serialize_schema(back), text);
    EXPECT_EQ(back.fingerprint(), s.fingerprint());
    EXPECT_EQ(binarize(d, back), binarize(d, s));
  }
}

TEST(Schema, ParseErrorsCarryLineNumbers) {
  FeatureSchema s = fit_schema(iris(), {3, 2});
  std::string text = serialize_schema(s);
  EXPECT_THROW(parse_schema(""), ParseError);
  EXPECT_THROW(parse_schema("SCHEMA v9\n"), ParseError);
  std::string truncated = text.substr(0, text.size() / 2);
  truncated = truncated.substr(0, truncated.rfind('\n') + 1);
  try {
    parse_schema(truncated);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 1u);
  }
}

TEST(Schema, FingerprintDependsOnColumnNames) {
  std::vector<std::string> a = {"x=bin1", "x=bin2"};
  std::vector<std::string> b = {"x=bin1", "x=bin3"};
  EXPECT_NE(fingerprint_of(a), fingerprint_of(b));
  EXPECT_EQ(fingerprint_hex(fingerprint_of(a)).size(), 16u);
  // FNV-1a offset basis for the empty input.
  EXPECT_EQ(fingerprint_of(std::vector<std::string>{}), 1469598103934665603ull);
}

TEST(Schema, EscapedTokensRoundTrip) {
  for (std::string raw : {"plain", "with space", "tab\there", "100%", "", "GET /a b\n", "\x7f\xff"}) {
    const std::string e = escape_token(raw);
    EXPECT_EQ(e.find_first_of(" \t\n"), std::string::npos);
    EXPECT_FALSE(e.empty());
    EXPECT_EQ(unescape_token(e), raw);
  }
}

}  // namespace
}  // namespace ruleids
