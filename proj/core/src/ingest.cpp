#include "ruleids/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "ruleids/error.hpp"

namespace ruleids {
namespace {

constexpr std::array<std::string_view, kdd::kFeatureCount> kKddNames = {
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
};

// protocol_type, service, flag, land, logged_in, is_host_login, is_guest_login
constexpr std::array<std::size_t, 7> kKddCategorical = {1, 2, 3, 6, 11, 20, 21};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> parse_real(std::string_view token) {
  token = trim(token);
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

void split_commas(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
}

std::string format_real(double value, bool two_decimals) {
  char buf[64];
  if (two_decimals) {
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
  }
  if (value == std::floor(value) && std::fabs(value) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", value);
    return buf;
  }
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

// Position of the closing quote for a quoted field starting after `open`,
// honoring backslash escapes.
std::size_t find_closing_quote(std::string_view line, std::size_t open) {
  for (std::size_t i = open + 1; i < line.size(); ++i) {
    if (line[i] == '\\') {
      ++i;
    } else if (line[i] == '"') {
      return i;
    }
  }
  return std::string_view::npos;
}

struct CsvHeader {
  std::vector<std::size_t> continuous;  // column indices
  std::vector<std::size_t> categorical;
  std::optional<std::size_t> label;
};

Dataset read_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line, options.delimiter);
      break;
    }
  }
  if (header.empty()) throw IngestError("csv input has no header line");
  for (auto& h : header) h = std::string(trim(h));

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, options.delimiter);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    rows.push_back(std::move(fields));
    row_lines.push_back(line_no);
  }

  CsvHeader layout;
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!by_name.emplace(header[c], c).second) {
      throw ParseError("duplicate column '" + header[c] + "'", 1);
    }
    if (header[c] == options.label_column) layout.label = c;
  }

  Dataset data;
  data.format = SourceFormat::csv;
  if (options.layout) {
    auto lookup = [&](const std::string& name) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ParseError("csv input lacks column '" + name + "'", 1);
      return it->second;
    };
    for (const auto& name : options.layout->continuous) {
      layout.continuous.push_back(lookup(name));
      data.continuous_names.push_back(name);
    }
    for (const auto& name : options.layout->categorical) {
      layout.categorical.push_back(lookup(name));
      data.categorical_names.push_back(name);
    }
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (layout.label && *layout.label == c) continue;
      bool numeric = !rows.empty() && std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
        return parse_real(r[c]).has_value();
      });
      if (numeric) {
        layout.continuous.push_back(c);
        data.continuous_names.push_back(header[c]);
      } else {
        layout.categorical.push_back(c);
        data.categorical_names.push_back(header[c]);
      }
    }
  }

  data.records.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Record rec;
    for (std::size_t c : layout.continuous) {
      auto v = parse_real(rows[r][c]);
      if (!v) {
        throw ParseError("column '" + header[c] + "' is not numeric: '" + rows[r][c] + "'",
                         row_lines[r]);
      }
      rec.continuous.push_back(*v);
    }
    for (std::size_t c : layout.categorical) rec.categorical.emplace_back(trim(rows[r][c]));
    if (layout.label) rec.label = std::string(trim(rows[r][*layout.label]));
    data.records.push_back(std::move(rec));
  }
  return data;
}

}  // namespace

std::string_view to_string(SourceFormat format) {
  switch (format) {
    case SourceFormat::kdd:
      return "kdd";
    case SourceFormat::apache:
      return "apache";
    case SourceFormat::csv:
      return "csv";
  }
  return "csv";
}

SourceFormat parse_source_format(std::string_view name) {
  if (name == "kdd") return SourceFormat::kdd;
  if (name == "apache") return SourceFormat::apache;
  if (name == "csv") return SourceFormat::csv;
  throw std::invalid_argument("unknown format '" + std::string(name) + "'");
}

bool Dataset::has_text() const {
  return !records.empty() && records.front().text.has_value();
}

bool Dataset::has_labels() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const Record& r) { return r.label.has_value(); });
}

std::vector<std::string> Dataset::field_names() const {
  std::vector<std::string> names = continuous_names;
  names.insert(names.end(), categorical_names.begin(), categorical_names.end());
  return names;
}

namespace kdd {

std::span<const std::string_view> feature_names() { return kKddNames; }

bool is_categorical(std::size_t field) {
  return std::find(kKddCategorical.begin(), kKddCategorical.end(), field) != kKddCategorical.end();
}

bool is_rate(std::size_t field) {
  return (field >= 24 && field <= 30) || (field >= 33 && field <= 40);
}

std::vector<std::string> continuous_names() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!is_categorical(i)) out.emplace_back(kKddNames[i]);
  }
  return out;
}

std::vector<std::string> categorical_names() {
  std::vector<std::string> out;
  for (std::size_t i : kKddCategorical) out.emplace_back(kKddNames[i]);
  return out;
}

}  // namespace kdd

Record parse_kdd_record(std::string_view line, std::size_t line_no) {
  thread_local std::vector<std::string_view> fields;
  line = trim(line);
  split_commas(line, fields);
  if (fields.size() != kdd::kFeatureCount && fields.size() != kdd::kFeatureCount + 1) {
    throw ParseError("expected 41 features and an optional label, got " +
                         std::to_string(fields.size()) + " fields",
                     line_no);
  }
  Record rec;
  rec.continuous.reserve(kdd::kFeatureCount - kKddCategorical.size());
  rec.categorical.reserve(kKddCategorical.size());
  for (std::size_t i = 0; i < kdd::kFeatureCount; ++i) {
    if (kdd::is_categorical(i)) {
      rec.categorical.emplace_back(trim(fields[i]));
    } else {
      auto v = parse_real(fields[i]);
      if (!v) {
        throw ParseError("field '" + std::string(kKddNames[i]) + "' is not numeric: '" +
                             std::string(fields[i]) + "'",
                         line_no);
      }
      rec.continuous.push_back(*v);
    }
  }
  if (fields.size() == kdd::kFeatureCount + 1) {
    std::string_view label = trim(fields.back());
    if (!label.empty() && label.back() == '.') label.remove_suffix(1);
    rec.label = std::string(label);
  }
  return rec;
}

std::string format_kdd_record(const Record& record) {
  if (record.continuous.size() + record.categorical.size() != kdd::kFeatureCount) {
    throw std::invalid_argument("record does not have the KDD field layout");
  }
  std::string out;
  std::size_t cont = 0;
  std::size_t cat = 0;
  for (std::size_t i = 0; i < kdd::kFeatureCount; ++i) {
    if (i > 0) out += ',';
    if (kdd::is_categorical(i)) {
      out += record.categorical[cat++];
    } else {
      out += format_real(record.continuous[cont++], kdd::is_rate(i));
    }
  }
  if (record.label) {
    out += ',';
    out += *record.label;
    out += '.';
  }
  return out;
}

ApacheEntry parse_apache_entry(std::string_view line, std::size_t line_no) {
  line = trim(line);
  ApacheEntry entry;
  std::size_t space = line.find(' ');
  if (space == std::string_view::npos) throw ParseError("truncated log line", line_no);
  entry.host = std::string(line.substr(0, space));

  std::size_t open_bracket = line.find('[', space);
  std::size_t close_bracket =
      open_bracket == std::string_view::npos ? open_bracket : line.find(']', open_bracket);
  if (close_bracket == std::string_view::npos) throw ParseError("missing [timestamp]", line_no);
  entry.timestamp = std::string(line.substr(open_bracket + 1, close_bracket - open_bracket - 1));

  std::size_t pos = close_bracket + 1;
  while (pos < line.size() && line[pos] == ' ') ++pos;
  if (pos >= line.size() || line[pos] != '"') throw ParseError("missing quoted request", line_no);
  std::size_t close = find_closing_quote(line, pos);
  if (close == std::string_view::npos) throw ParseError("unterminated request quote", line_no);
  entry.request = std::string(line.substr(pos + 1, close - pos - 1));

  // status and byte count
  pos = close + 1;
  while (pos < line.size() && line[pos] == ' ') ++pos;
  std::size_t status_end = line.find(' ', pos);
  std::string_view status = line.substr(pos, status_end == std::string_view::npos ? line.size() - pos
                                                                                : status_end - pos);
  auto [ptr, ec] = std::from_chars(status.data(), status.data() + status.size(), entry.status);
  if (ec != std::errc{} || ptr != status.data() + status.size()) {
    throw ParseError("bad status code '" + std::string(status) + "'", line_no);
  }

  // Optional "referer" "user-agent" pair of the combined format.
  std::vector<std::string> quoted;
  pos = status_end;
  while (pos != std::string_view::npos && pos < line.size()) {
    std::size_t open = line.find('"', pos);
    if (open == std::string_view::npos) break;
    std::size_t end = find_closing_quote(line, open);
    if (end == std::string_view::npos) throw ParseError("unterminated quote", line_no);
    quoted.emplace_back(line.substr(open + 1, end - open - 1));
    pos = end + 1;
  }
  if (!quoted.empty()) entry.referer = quoted[0];
  if (quoted.size() > 1) entry.user_agent = quoted[1];
  return entry;
}

Record parse_apache_line(std::string_view line, const ApacheOptions& options, std::size_t line_no) {
  ApacheEntry entry = parse_apache_entry(line, line_no);
  Record rec;
  rec.text = std::move(entry.request);
  if (options.include_user_agent && !entry.user_agent.empty()) {
    *rec.text += ' ';
    *rec.text += entry.user_agent;
  }
  return rec;
}

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else if (ch != '\r') {
      current += ch;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

CsvRowParser::CsvRowParser(std::string_view header_line, const CsvLayout& layout, const CsvOptions& options)
    : delimiter_(options.delimiter) {
  header_ = split_csv_line(header_line, delimiter_);
  n_fields_ = header_.size();
  for (auto& h : header_) h = std::string(trim(h));
  auto lookup = [&](const std::string& name) {
    auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) throw ParseError("csv input lacks column '" + name + "'", 1);
    return static_cast<std::size_t>(it - header_.begin());
  };
  for (const auto& name : layout.continuous) continuous_.push_back(lookup(name));
  for (const auto& name : layout.categorical) categorical_.push_back(lookup(name));
  auto it = std::find(header_.begin(), header_.end(), options.label_column);
  if (it != header_.end()) label_ = static_cast<std::size_t>(it - header_.begin());
}

Record CsvRowParser::parse(std::string_view line, std::size_t line_no) const {
  auto fields = split_csv_line(line, delimiter_);
  if (fields.size() != n_fields_) {
    throw ParseError("expected " + std::to_string(n_fields_) + " fields, got " + std::to_string(fields.size()),
                     line_no);
  }
  Record rec;
  rec.continuous.reserve(continuous_.size());
  for (std::size_t c : continuous_) {
    auto v = parse_real(fields[c]);
    if (!v) throw ParseError("column '" + header_[c] + "' is not numeric: '" + fields[c] + "'", line_no);
    rec.continuous.push_back(*v);
  }
  for (std::size_t c : categorical_) rec.categorical.emplace_back(trim(fields[c]));
  if (label_) rec.label = std::string(trim(fields[*label_]));
  return rec;
}

Dataset read_dataset(std::istream& in, SourceFormat format, const LoadOptions& options) {
  Dataset data;
  if (format == SourceFormat::csv) {
    data = read_csv(in, options.csv);
  } else {
    data.format = format;
    if (format == SourceFormat::kdd) {
      data.continuous_names = kdd::continuous_names();
      data.categorical_names = kdd::categorical_names();
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      if (format == SourceFormat::kdd) {
        data.records.push_back(parse_kdd_record(line, line_no));
      } else {
        try {
          data.records.push_back(parse_apache_line(line, options.apache, line_no));
        } catch (const ParseError&) {
          ++data.skipped_lines;
        }
      }
    }
  }
  if (data.records.empty()) {
    throw IngestError("no records parsed from " + std::string(to_string(format)) + " input" +
                      (data.skipped_lines ? " (" + std::to_string(data.skipped_lines) +
                                                " malformed lines skipped)"
                                          : ""));
  }
  if (options.limit && *options.limit < data.records.size()) {
    auto keep = sample_indices(data.records.size(), *options.limit, options.seed);
    data = subset(data, keep);
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& path, SourceFormat format, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  try {
    return read_dataset(in, format, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const IngestError& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> shuffled_prefix(std::size_t population, std::size_t count,
                                         std::uint64_t seed) {
  if (count > population) {
    throw std::invalid_argument("cannot sample " + std::to_string(count) + " of " +
                                std::to_string(population));
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}


std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, std::uint64_t seed) {
  auto idx = shuffled_prefix(population, count, seed);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.format = data.format;
  out.continuous_names = data.continuous_names;
  out.categorical_names = data.categorical_names;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.records.size()) throw std::out_of_range("subset index out of range");
    out.records.push_back(data.records[i]);
  }
  return out;
}

DatasetSplit split_dataset(const Dataset& data, std::size_t train_size, std::size_t test_size,
                           std::uint64_t seed) {
  auto idx = shuffled_prefix(data.size(), train_size + test_size, seed);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_size));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(train_size), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset(data, train), subset(data, test)};
}

}  // namespace ruleids
