#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruleids/bit_matrix.hpp"
#include "ruleids/clustering.hpp"
#include "ruleids/embedding.hpp"
#include "ruleids/features.hpp"
#include "ruleids/ingest.hpp"
#include "ruleids/metrics.hpp"
#include "ruleids/rules.hpp"

namespace ruleids {

// Every knob of a training run. The resolved values are written to
// config.txt in the model directory.
struct RunConfig {
  SourceFormat format = SourceFormat::kdd;
  std::string label_column = "label";
  bool include_user_agent = false;
  std::optional<std::size_t> limit;
  std::size_t train_cap = 25000;

  int n_bins = 10;
  int ngram_n = 2;
  bool ngram_counts = false;

  bool skip_embedding = false;
  std::optional<double> epsilon;
  std::optional<int> dims;
  std::size_t epsilon_sample_size = 200;
  int max_eigenpairs = 30;
  bool scaled_eigenvectors = false;

  std::optional<int> k;
  int k_min = 2;
  int k_max = 20;
  int restarts = 10;

  std::uint64_t seed = 1;
  LabelingStrategy labeling;
  UnknownPolicy unknown_policy = UnknownPolicy::as_attack;

  LoadOptions load_options() const;
  std::string to_text() const;
  // Throws ModelError on unknown keys or malformed values.
  static RunConfig from_text(std::string_view text);
};

// Answers a manual:auto-prompt labeling: receives a cluster summary and
// returns the line naming the normal clusters (e.g. "4" or "2,5").
using LabelPrompt = std::function<std::string(std::string_view summary)>;

struct TrainResult {
  FeatureSchema schema;
  BinaryFeatureMatrix matrix;
  std::optional<DiffusionResult> diffusion;
  Eigen::MatrixXd cluster_input;  // points handed to k-means
  ClusterModel clusters;
  std::vector<std::pair<int, double>> silhouette_curve;
  LabelingStrategy labeling;      // as resolved (prompt answered)
  ClassLabeling classes;
  RuleSet rules;
};

// ingest → features → (embedding) → clustering → labeling → rule extraction.
// Labels on `data` are ignored.
TrainResult train(const Dataset& data, const RunConfig& config, const LabelPrompt& prompt = {});

// Cluster sizes and the record closest to each centroid.
std::string cluster_summary(const ClusterModel& clusters, const Eigen::MatrixXd& points, const Dataset& data);

// Writes config.txt, schema.txt, rules.txt, clusters.tsv and diag/*.tsv.
void write_model(const std::filesystem::path& dir, const TrainResult& result, const RunConfig& config);

struct Model {
  RunConfig config;
  FeatureSchema schema;
  RuleSet rules;
};

// Throws ModelError for missing or malformed files and schema mismatches.
Model load_model(const std::filesystem::path& dir);

struct ClassifyStats {
  std::size_t rows = 0;
  std::size_t unknown = 0;
  std::size_t skipped = 0;  // malformed log lines
};

// One line per input row: <row#>\t<class|UNKNOWN>\t<rule#|UNKNOWN>\t<matches>,
// row and rule numbers 1-based.
ClassifyStats classify_stream(const Model& model, std::istream& in, std::ostream& out);

struct RowDecision {
  std::optional<std::size_t> rule;
  std::string label;  // empty when unknown
  std::size_t match_count = 0;
};
std::vector<RowDecision> classify_dataset(const Model& model, const Dataset& data);

struct EvalResult {
  bool binary = false;  // ruleset classes are {normal, attack}
  ConfusionResult confusion;
  MetricsReport metrics;
  MultiClassConfusion table;
  std::size_t rows = 0;
  std::size_t unknown = 0;
};

// Throws Error when `data` is unlabeled.
EvalResult evaluate(const Model& model, const Dataset& data, UnknownPolicy policy);
std::string format_eval(const EvalResult& result, UnknownPolicy policy);

// Human-readable rule listing, optionally with a +/-/. grid.
std::string render_rules(const Model& model, bool grid);
std::string describe_column(const FeatureSchema& schema, std::size_t column);
// Conditions of one rule, literals on the same continuous field merged into
// the set of bins they allow.
std::string describe_rule(const FeatureSchema& schema, const ConjunctiveRule& rule);

// Writes disjoint seeded train/test samples of the input's lines (a CSV
// header is copied to both).
void sample_lines(const std::filesystem::path& input, SourceFormat format, std::size_t train_size,
                  std::size_t test_size, std::uint64_t seed, const std::filesystem::path& train_out,
                  const std::filesystem::path& test_out);

}  // namespace ruleids
