#include "ruleids/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ruleids/error.hpp"
#include "ruleids/log.hpp"

namespace ruleids {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

template <typename T>
std::string opt_text(const std::optional<T>& v) {
  if (!v) return "auto";
  if constexpr (std::is_floating_point_v<T>) {
    return num(*v);
  } else {
    return std::to_string(*v);
  }
}

// Runs one training stage and prefixes its errors with the stage name.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const TrainError& e) {
    throw TrainError(std::string(name) + ": " + e.what());
  } catch (const ModelError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw TrainError(std::string(name) + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("missing model file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    res = std::from_chars(value.data(), end, out, std::chars_format::general);
  } else {
    res = std::from_chars(value.data(), end, out);
  }
  if (res.ec != std::errc() || res.ptr != end) {
    throw ModelError("config: bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_flag(std::string_view key, std::string_view value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ModelError("config: bad value '" + std::string(value) + "' for " + std::string(key));
}

const char* flag(bool b) { return b ? "true" : "false"; }

std::string record_summary(const Dataset& data, const Record& rec) {
  if (data.format == SourceFormat::kdd) {
    Record copy = rec;
    copy.label.reset();
    return format_kdd_record(copy);
  }
  std::string out;
  for (std::size_t i = 0; i < rec.continuous.size(); ++i) {
    if (!out.empty()) out += ", ";
    out += data.continuous_names[i] + "=" + short_num(rec.continuous[i]);
  }
  for (std::size_t i = 0; i < rec.categorical.size(); ++i) {
    if (!out.empty()) out += ", ";
    out += data.categorical_names[i] + "=" + rec.categorical[i];
  }
  if (rec.text) {
    if (!out.empty()) out += ", ";
    out += "text=" + *rec.text;
  }
  return out;
}

bool is_binary_ruleset(const RuleSet& rules) {
  auto classes = rules.classes();
  return !classes.empty() && std::all_of(classes.begin(), classes.end(), [](const std::string& c) {
    return c == kNormalClass || c == kAttackClass;
  });
}

// Reads one data row at a time from a stream in the model's input format.
class RowReader {
 public:
  RowReader(const Model& model, std::istream& in) : model_(model), in_(in) {
    apache_.include_user_agent = model.config.include_user_agent;
    if (model.schema.format == SourceFormat::csv) {
      std::string header;
      while (std::getline(in_, header)) {
        ++line_no_;
        if (!trim(header).empty()) break;
      }
      if (trim(header).empty()) throw IngestError("csv input has no header line");
      CsvOptions options;
      options.label_column = model.config.label_column;
      csv_.emplace(header, model.schema.csv_layout(), options);
    }
  }

  // False at end of input. Malformed Apache lines are skipped but still
  // consume a row number.
  bool next(Record& rec, std::size_t& row) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (trim(line_).empty()) continue;
      row = ++rows_;
      switch (model_.schema.format) {
        case SourceFormat::kdd:
          rec = parse_kdd_record(line_, line_no_);
          return true;
        case SourceFormat::csv:
          rec = csv_->parse(line_, line_no_);
          return true;
        case SourceFormat::apache:
          try {
            rec = parse_apache_line(line_, apache_, line_no_);
            return true;
          } catch (const ParseError&) {
            ++skipped_;
          }
          break;
      }
    }
    return false;
  }

  std::size_t skipped() const { return skipped_; }

 private:
  const Model& model_;
  std::istream& in_;
  std::string line_;
  std::size_t line_no_ = 0;
  std::size_t rows_ = 0;
  std::size_t skipped_ = 0;
  ApacheOptions apache_;
  std::optional<CsvRowParser> csv_;
};

void append_uint(std::string& out, std::size_t v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

std::string bin_interval(const ContinuousBinning& b, std::size_t bin) {
  const bool last = bin + 1 == static_cast<std::size_t>(b.n_bins);
  return "[" + short_num(b.edges[bin]) + "," + short_num(b.edges[bin + 1]) + (last ? "]" : ")");
}

std::string describe_literal(const FeatureSchema& schema, std::size_t column, Literal lit) {
  const Column& c = schema.columns.at(column);
  const bool neg = lit == Literal::must_be_zero;
  switch (c.kind) {
    case ColumnKind::bin: {
      const auto& b = schema.continuous.at(c.field);
      return b.name + (neg ? "∉" : "∈") + "bin" + std::to_string(c.value + 1) + bin_interval(b, c.value);
    }
    case ColumnKind::category: {
      const auto& v = schema.categorical.at(c.field);
      return v.name + (neg ? "≠" : "=") + v.categories.at(c.value);
    }
    case ColumnKind::ngram:
      return std::string("text") + (neg ? "∌" : "∋") + "'" + schema.ngram->grams.at(c.value) + "'";
  }
  return c.name;
}

// Every bin of a continuous field maps to exactly one value range, so the
// literals on one field reduce to a set of allowed bins. Bins whose column
// was dropped stay allowed unless a must-be-one literal excludes them.
std::string describe_bin_field(const FeatureSchema& schema, std::size_t field,
                               const std::vector<std::pair<std::size_t, Literal>>& lits) {
  const auto& b = schema.continuous.at(field);
  std::vector<bool> allowed(static_cast<std::size_t>(b.n_bins), true);
  int ones = 0;
  for (const auto& [col, lit] : lits) {
    const std::size_t bin = schema.columns[col].value;
    if (lit == Literal::must_be_one) {
      ++ones;
      for (std::size_t k = 0; k < allowed.size(); ++k) allowed[k] = allowed[k] && k == bin;
    } else {
      allowed[bin] = false;
    }
  }
  std::vector<std::size_t> in, out;
  for (std::size_t k = 0; k < allowed.size(); ++k) (allowed[k] ? in : out).push_back(k);
  if (ones > 1 || in.empty()) {
    std::string raw;
    for (const auto& [col, lit] : lits) raw += (raw.empty() ? "" : " AND ") + describe_literal(schema, col, lit);
    return raw;
  }
  auto one = [&](std::size_t k) { return "bin" + std::to_string(k + 1) + bin_interval(b, k); };
  auto set = [&](const std::vector<std::size_t>& bins) {
    std::string s = "{";
    for (std::size_t i = 0; i < bins.size(); ++i) s += (i ? "," : "") + one(bins[i]);
    return s + "}";
  };
  if (in.size() == 1) return b.name + "∈" + one(in[0]);
  if (out.size() == 1) return b.name + "∉" + one(out[0]);
  return in.size() <= out.size() ? b.name + "∈" + set(in) : b.name + "∉" + set(out);
}

}  // namespace

LoadOptions RunConfig::load_options() const {
  LoadOptions o;
  o.limit = limit;
  o.seed = seed;
  o.apache.include_user_agent = include_user_agent;
  o.csv.label_column = label_column;
  return o;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "# ruleids run configuration v1\n";
  out << "format=" << to_string(format) << '\n';
  out << "label_column=" << label_column << '\n';
  out << "include_user_agent=" << flag(include_user_agent) << '\n';
  out << "limit=" << (limit ? std::to_string(*limit) : "none") << '\n';
  out << "train_cap=" << train_cap << '\n';
  out << "n_bins=" << n_bins << '\n';
  out << "ngram_n=" << ngram_n << '\n';
  out << "ngram_counts=" << flag(ngram_counts) << '\n';
  out << "skip_embedding=" << flag(skip_embedding) << '\n';
  out << "epsilon=" << opt_text(epsilon) << '\n';
  out << "dims=" << opt_text(dims) << '\n';
  out << "epsilon_sample_size=" << epsilon_sample_size << '\n';
  out << "max_eigenpairs=" << max_eigenpairs << '\n';
  out << "scaled_eigenvectors=" << flag(scaled_eigenvectors) << '\n';
  out << "k=" << opt_text(k) << '\n';
  out << "k_min=" << k_min << '\n';
  out << "k_max=" << k_max << '\n';
  out << "restarts=" << restarts << '\n';
  out << "seed=" << seed << '\n';
  out << "labeling=" << labeling.to_string() << '\n';
  out << "unknown_policy=" << to_string(unknown_policy) << '\n';
  return out.str();
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig c;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ModelError("config: malformed line '" + std::string(line) + "'");
    std::string_view key = line.substr(0, eq);
    std::string_view value = line.substr(eq + 1);
    try {
      if (key == "format") {
        c.format = parse_source_format(value);
      } else if (key == "label_column") {
        c.label_column = std::string(value);
      } else if (key == "include_user_agent") {
        c.include_user_agent = parse_flag(key, value);
      } else if (key == "limit") {
        if (value == "none") c.limit.reset();
        else c.limit = parse_number<std::size_t>(key, value);
      } else if (key == "train_cap") {
        c.train_cap = parse_number<std::size_t>(key, value);
      } else if (key == "n_bins") {
        c.n_bins = parse_number<int>(key, value);
      } else if (key == "ngram_n") {
        c.ngram_n = parse_number<int>(key, value);
      } else if (key == "ngram_counts") {
        c.ngram_counts = parse_flag(key, value);
      } else if (key == "skip_embedding") {
        c.skip_embedding = parse_flag(key, value);
      } else if (key == "epsilon") {
        if (value == "auto") c.epsilon.reset();
        else c.epsilon = parse_number<double>(key, value);
      } else if (key == "dims") {
        if (value == "auto") c.dims.reset();
        else c.dims = parse_number<int>(key, value);
      } else if (key == "epsilon_sample_size") {
        c.epsilon_sample_size = parse_number<std::size_t>(key, value);
      } else if (key == "max_eigenpairs") {
        c.max_eigenpairs = parse_number<int>(key, value);
      } else if (key == "scaled_eigenvectors") {
        c.scaled_eigenvectors = parse_flag(key, value);
      } else if (key == "k") {
        if (value == "auto") c.k.reset();
        else c.k = parse_number<int>(key, value);
      } else if (key == "k_min") {
        c.k_min = parse_number<int>(key, value);
      } else if (key == "k_max") {
        c.k_max = parse_number<int>(key, value);
      } else if (key == "restarts") {
        c.restarts = parse_number<int>(key, value);
      } else if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(key, value);
      } else if (key == "labeling") {
        c.labeling = LabelingStrategy::parse(value);
      } else if (key == "unknown_policy") {
        c.unknown_policy = parse_unknown_policy(value);
      } else {
        throw ModelError("config: unknown key '" + std::string(key) + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw ModelError("config: " + std::string(e.what()));
    }
  }
  return c;
}

TrainResult train(const Dataset& data, const RunConfig& config, const LabelPrompt& prompt) {
  if (data.empty()) throw IngestError("training data is empty");
  if (data.size() > config.train_cap) {
    throw TrainError("training set has " + std::to_string(data.size()) + " rows, above train_cap " +
                     std::to_string(config.train_cap) + "; subsample with --limit");
  }

  TrainResult out;
  out.schema = stage("features", [&] { return fit_schema(data, {config.n_bins, config.ngram_n}); });
  out.matrix = stage("features", [&] { return binarize(data, out.schema); });
  if (out.schema.column_count() == 0) throw TrainError("features: every feature column is constant");
  log_info("features: " + std::to_string(out.matrix.rows()) + " x " + std::to_string(out.matrix.cols()) +
           " binary matrix");

  Eigen::MatrixXd input = config.ngram_counts && out.schema.ngram ? count_feature_matrix(data, out.schema)
                                                                  : out.matrix.to_dense();
  if (config.skip_embedding) {
    out.cluster_input = std::move(input);
  } else {
    DiffusionConfig dc;
    dc.epsilon = config.epsilon;
    dc.dims = config.dims;
    dc.epsilon_sample_size = config.epsilon_sample_size;
    dc.seed = config.seed;
    dc.max_eigenpairs = config.max_eigenpairs;
    dc.scaled_eigenvectors = config.scaled_eigenvectors;
    out.diffusion = stage("embedding", [&] { return embed(input, dc); });
    out.cluster_input = out.diffusion->embedding.coords;
    log_info("embedding: epsilon " + short_num(out.diffusion->epsilon) + ", " +
             std::to_string(out.diffusion->embedding.dims) + " dimensions");
  }

  KMeansOptions km;
  km.restarts = config.restarts;
  if (config.k) {
    out.clusters = stage("clustering", [&] { return kmeans(out.cluster_input, *config.k, config.seed, km); });
    auto s = stage("clustering", [&] { return silhouette(out.cluster_input, out.clusters.assignment); });
    out.silhouette_curve = {{*config.k, s.mean}};
  } else {
    auto sel = stage("clustering", [&] {
      return select_k(out.cluster_input, config.k_min, config.k_max, config.seed, km);
    });
    out.clusters = std::move(sel.model);
    out.silhouette_curve = std::move(sel.curve);
  }
  log_info("clustering: k = " + std::to_string(out.clusters.k));

  out.labeling = config.labeling;
  if (out.labeling.prompt) {
    if (!prompt) throw TrainError("labeling: manual:auto-prompt needs an answer on standard input");
    std::string answer(trim(prompt(cluster_summary(out.clusters, out.cluster_input, data))));
    out.labeling = stage("labeling", [&] {
      try {
        return LabelingStrategy::parse("manual:" + answer);
      } catch (const std::invalid_argument&) {
        throw TrainError("cannot read cluster list '" + answer + "'");
      }
    });
  }
  out.classes = stage("labeling", [&] { return label_clusters(out.clusters, out.labeling); });

  const auto names = out.schema.column_names();
  out.rules = stage("rules", [&] { return extract_rules(out.matrix, out.classes.point_class, names, config.seed); });
  log_info("rules: " + std::to_string(out.rules.rules.size()) + " rules");
  return out;
}

std::string cluster_summary(const ClusterModel& clusters, const Eigen::MatrixXd& points, const Dataset& data) {
  const auto sizes = clusters.cluster_sizes();
  std::vector<std::size_t> rep(static_cast<std::size_t>(clusters.k), 0);
  std::vector<double> best(static_cast<std::size_t>(clusters.k), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < clusters.assignment.size(); ++i) {
    const auto c = static_cast<std::size_t>(clusters.assignment[i]);
    const double d = (points.row(static_cast<Eigen::Index>(i)) - clusters.centroids.row(static_cast<Eigen::Index>(c)))
                         .squaredNorm();
    if (d < best[c]) {
      best[c] = d;
      rep[c] = i;
    }
  }
  std::ostringstream out;
  const double n = static_cast<double>(clusters.assignment.size());
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "cluster %zu: %zu rows (%.1f%%)\n", c + 1, sizes[c],
                  100.0 * static_cast<double>(sizes[c]) / n);
    out << buf;
    if (sizes[c] > 0) out << "  representative: " << record_summary(data, data.records[rep[c]]) << '\n';
  }
  return out.str();
}

void write_model(const std::filesystem::path& dir, const TrainResult& result, const RunConfig& config) {
  std::filesystem::create_directories(dir / "diag");

  RunConfig resolved = config;
  resolved.labeling = result.labeling;
  write_file(dir / "config.txt", resolved.to_text());
  write_file(dir / "schema.txt", serialize_schema(result.schema));
  write_file(dir / "rules.txt", serialize_ruleset(result.rules));

  const auto sizes = result.clusters.cluster_sizes();
  std::vector<double> sil_means;
  try {
    sil_means = silhouette(result.cluster_input, result.clusters.assignment).cluster_means;
  } catch (const TrainError&) {
    sil_means.assign(sizes.size(), 0.0);
  }
  std::string clusters = "cluster\tsize\tclass\tsilhouette\trules\n";
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const auto& cls = result.classes.cluster_class[c];
    clusters += std::to_string(c + 1) + '\t' + std::to_string(sizes[c]) + '\t' + cls + '\t' + num(sil_means[c]) +
                '\t' + std::to_string(result.rules.count_for(cls)) + '\n';
  }
  write_file(dir / "clusters.tsv", clusters);

  std::string assign = "row\tcluster\n";
  for (std::size_t i = 0; i < result.clusters.assignment.size(); ++i) {
    assign += std::to_string(i + 1) + '\t' + std::to_string(result.clusters.assignment[i] + 1) + '\n';
  }
  write_file(dir / "diag" / "assignment.tsv", assign);

  std::string sil = "k\tmean_silhouette\n";
  for (const auto& [k, s] : result.silhouette_curve) sil += std::to_string(k) + '\t' + num(s) + '\n';
  write_file(dir / "diag" / "silhouette.tsv", sil);

  std::string eps = "epsilon\tweight_sum\tchosen\n";
  std::string eig = "index\teigenvalue\n";
  std::string emb = "row";
  if (result.diffusion) {
    const auto& d = *result.diffusion;
    if (d.scan) {
      for (const auto& p : d.scan->curve) {
        eps += num(p.epsilon) + '\t' + num(p.weight_sum) + '\t' + (p.epsilon == d.epsilon ? "1" : "0") + '\n';
      }
    } else {
      eps += num(d.epsilon) + "\tnan\t1\n";
    }
    for (Eigen::Index i = 0; i < d.spectrum.eigenvalues.size(); ++i) {
      eig += std::to_string(i + 1) + '\t' + num(d.spectrum.eigenvalues(i)) + '\n';
    }
    const auto& coords = d.embedding.coords;
    for (Eigen::Index j = 0; j < coords.cols(); ++j) emb += "\tpsi" + std::to_string(j + 1);
    emb += '\n';
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
      emb += std::to_string(i + 1);
      for (Eigen::Index j = 0; j < coords.cols(); ++j) emb += '\t' + num(coords(i, j));
      emb += '\n';
    }
  } else {
    emb += '\n';
  }
  write_file(dir / "diag" / "epsilon.tsv", eps);
  write_file(dir / "diag" / "eigenvalues.tsv", eig);
  write_file(dir / "diag" / "embedding.tsv", emb);
}

Model load_model(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ModelError("model directory '" + dir.string() + "' not found");
  Model m;
  m.config = RunConfig::from_text(read_file(dir / "config.txt"));
  try {
    m.schema = parse_schema(read_file(dir / "schema.txt"));
  } catch (const ParseError& e) {
    throw ModelError("schema.txt: " + std::string(e.what()));
  }
  try {
    m.rules = parse_ruleset(read_file(dir / "rules.txt"));
  } catch (const ParseError& e) {
    throw ModelError("rules.txt: " + std::string(e.what()));
  }
  check_compatible(m.rules, m.schema.fingerprint());
  if (m.schema.format != m.config.format) {
    throw ModelError("config.txt format " + std::string(to_string(m.config.format)) + " disagrees with schema.txt");
  }
  return m;
}

ClassifyStats classify_stream(const Model& model, std::istream& in, std::ostream& out) {
  Binarizer bin(model.schema);
  RuleMatcher matcher(model.rules);
  RowReader reader(model, in);
  std::vector<Word> bits(bin.words_per_row());
  ClassifyStats stats;
  std::size_t unseen = 0;
  std::string buf;
  buf.reserve(1 << 16);
  Record rec;
  std::size_t row = 0;
  while (reader.next(rec, row)) {
    unseen += bin.encode(rec, bits);
    const ClassDecision d = matcher.classify(bits);
    ++stats.rows;
    append_uint(buf, row);
    buf += '\t';
    if (d.unknown()) {
      ++stats.unknown;
      buf += "UNKNOWN\tUNKNOWN\t0\n";
    } else {
      buf.append(d.label);
      buf += '\t';
      append_uint(buf, *d.rule + 1);
      buf += '\t';
      append_uint(buf, d.match_count);
      buf += '\n';
    }
    if (buf.size() > (1 << 16) - 256) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  stats.skipped = reader.skipped();
  if (unseen) log_warning(std::to_string(unseen) + " categorical values outside the training vocabulary");
  if (stats.skipped) log_warning(std::to_string(stats.skipped) + " malformed lines skipped");
  return stats;
}

std::vector<RowDecision> classify_dataset(const Model& model, const Dataset& data) {
  const BinaryFeatureMatrix x = binarize(data, model.schema);
  RuleMatcher matcher(model.rules);
  std::vector<RowDecision> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const ClassDecision d = matcher.classify(x.row(r));
    out[r].rule = d.rule;
    out[r].label = std::string(d.label);
    out[r].match_count = d.match_count;
  }
  return out;
}

EvalResult evaluate(const Model& model, const Dataset& data, UnknownPolicy policy) {
  if (!data.has_labels()) throw IngestError("evaluation data carries no labels");
  const auto decisions = classify_dataset(model, data);
  EvalResult r;
  r.rows = decisions.size();
  r.binary = is_binary_ruleset(model.rules);
  std::vector<Verdict> verdicts;
  std::vector<Truth> truth;
  verdicts.reserve(r.rows);
  truth.reserve(r.rows);
  for (std::size_t i = 0; i < r.rows; ++i) {
    const auto& d = decisions[i];
    const std::string& label = *data.records[i].label;
    if (!d.rule) ++r.unknown;
    r.table.add(label, d.rule ? &d.label : nullptr);
    if (r.binary) {
      verdicts.push_back(!d.rule ? Verdict::unknown : d.label == kNormalClass ? Verdict::normal : Verdict::attack);
      truth.push_back(label == kNormalClass ? Truth::normal : Truth::attack);
    }
  }
  if (r.binary) {
    r.confusion = confusion(verdicts, truth, policy);
    r.metrics = compute_metrics(r.confusion.matrix);
  }
  return r;
}

std::string format_eval(const EvalResult& result, UnknownPolicy policy) {
  std::ostringstream out;
  out << "rows: " << result.rows << "\nunknown: " << result.unknown << " (policy " << to_string(policy) << ")\n";
  if (policy == UnknownPolicy::exclude && result.binary) out << "excluded: " << result.confusion.excluded << '\n';
  out << '\n';
  if (result.binary) {
    out << format_metrics(result.confusion.matrix, result.metrics) << '\n';
  }
  out << result.table.format();
  return out.str();
}

std::string describe_column(const FeatureSchema& schema, std::size_t column) {
  return describe_literal(schema, column, Literal::must_be_one);
}

std::string describe_rule(const FeatureSchema& schema, const ConjunctiveRule& rule) {
  std::string out;
  std::vector<std::pair<std::size_t, Literal>> group;
  auto flush = [&] {
    if (group.empty()) return;
    const Column& c = schema.columns[group.front().first];
    std::string text;
    if (c.kind == ColumnKind::bin) {
      text = describe_bin_field(schema, c.field, group);
    } else {
      for (const auto& [col, lit] : group) {
        text += (text.empty() ? "" : " AND ") + describe_literal(schema, col, lit);
      }
    }
    out += (out.empty() ? "" : " AND ") + text;
    group.clear();
  };
  for (std::size_t col = 0; col < rule.mask.size(); ++col) {
    if (rule.mask[col] == Literal::any) continue;
    if (!group.empty()) {
      const Column& prev = schema.columns[group.front().first];
      const Column& cur = schema.columns[col];
      if (prev.kind != cur.kind || prev.field != cur.field) flush();
    }
    group.emplace_back(col, rule.mask[col]);
  }
  flush();
  return out.empty() ? "TRUE" : out;
}

std::string render_rules(const Model& model, bool grid) {
  const auto& rules = model.rules.rules;
  std::ostringstream out;
  out << rules.size() << " rules over " << model.rules.column_count() << " columns\n";
  for (const auto& cls : model.rules.classes()) {
    out << "  class " << cls << ": " << model.rules.count_for(cls) << " rules\n";
  }
  out << '\n';
  for (std::size_t r = 0; r < rules.size(); ++r) {
    out << "rule " << (r + 1) << ": class=" << rules[r].label << " IF " << describe_rule(model.schema, rules[r]) << '\n';
  }
  if (grid) {
    // One row per rule, one cell per column: + must be 1, - must be 0, · any.
    out << "\ngrid (columns in schema order)\n";
    for (std::size_t c = 0; c < model.rules.column_count(); ++c) {
      out << "  col " << (c + 1) << ": " << model.rules.column_names[c] << '\n';
    }
    for (std::size_t r = 0; r < rules.size(); ++r) {
      char head[32];
      std::snprintf(head, sizeof head, "%4zu ", r + 1);
      out << head;
      for (Literal l : rules[r].mask) {
        out << (l == Literal::must_be_one ? "+" : l == Literal::must_be_zero ? "-" : "·");
      }
      out << ' ' << rules[r].label << '\n';
    }
  }
  return out.str();
}

void sample_lines(const std::filesystem::path& input, SourceFormat format, std::size_t train_size,
                  std::size_t test_size, std::uint64_t seed, const std::filesystem::path& train_out,
                  const std::filesystem::path& test_out) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IngestError("cannot open '" + input.string() + "'");
  std::string header;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (format == SourceFormat::csv && header.empty()) {
      header = line;
      continue;
    }
    lines.push_back(std::move(line));
  }
  if (train_size + test_size > lines.size()) {
    throw IngestError("cannot draw " + std::to_string(train_size + test_size) + " rows from " +
                      std::to_string(lines.size()));
  }
  auto idx = shuffled_prefix(lines.size(), train_size + test_size, seed);
  auto emit = [&](const std::filesystem::path& path, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(part.begin(), part.end());
    std::string content;
    if (!header.empty()) content += header + '\n';
    for (std::size_t i : part) content += lines[i] + '\n';
    write_file(path, content);
  };
  emit(train_out, 0, train_size);
  emit(test_out, train_size, train_size + test_size);
}

}  // namespace ruleids
