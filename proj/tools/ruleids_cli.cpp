#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ruleids/error.hpp"
#include "ruleids/log.hpp"
#include "ruleids/pipeline.hpp"

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIngest = 3, kTrain = 4, kModel = 5 };

struct TrainArgs {
  std::string data;
  std::string model_dir;
  std::string format = "kdd";
  std::string labeling = "largest-is-normal";
  std::string unknown_policy = "as-attack";
  double epsilon = 0.0;
  int dims = 0;
  int k = 0;
  std::size_t limit = 0;
  bool quiet = false;
};

struct ModelArgs {
  std::string data;
  std::string model_dir;
  std::string output;
  std::string unknown_policy;
  bool grid = false;
  bool tsv = false;
};

struct SampleArgs {
  std::string input;
  std::string format = "kdd";
  std::size_t train = 5000;
  std::size_t test = 5000;
  std::uint64_t seed = 1;
  std::string train_out;
  std::string test_out;
};

std::string read_answer(std::string_view summary) {
  std::cerr << summary << "normal cluster ordinals (e.g. 4 or 2,5): " << std::flush;
  std::string line;
  std::getline(std::cin, line);
  return line;
}

int run_train(const TrainArgs& a, ruleids::RunConfig config) {
  config.format = ruleids::parse_source_format(a.format);
  config.labeling = ruleids::LabelingStrategy::parse(a.labeling);
  config.unknown_policy = ruleids::parse_unknown_policy(a.unknown_policy);
  if (a.epsilon > 0.0) config.epsilon = a.epsilon;
  if (a.dims > 0) config.dims = a.dims;
  if (a.k > 0) config.k = a.k;
  if (a.limit > 0) config.limit = a.limit;

  const auto data = ruleids::load_dataset(a.data, config.format, config.load_options());
  ruleids::log_info("ingest: " + std::to_string(data.size()) + " records");
  auto result = ruleids::train(data, config, read_answer);
  ruleids::write_model(a.model_dir, result, config);
  std::printf("%zu rules written to %s\n", result.rules.rules.size(), a.model_dir.c_str());
  return kOk;
}

int run_classify(const ModelArgs& a) {
  const auto model = ruleids::load_model(a.model_dir);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (a.data != "-") {
    file.open(a.data, std::ios::binary);
    if (!file) throw ruleids::IngestError("cannot open '" + a.data + "'");
    in = &file;
  }
  std::ofstream out_file;
  std::ostream* out = &std::cout;
  if (!a.output.empty()) {
    out_file.open(a.output, std::ios::binary | std::ios::trunc);
    if (!out_file) throw ruleids::Error("cannot write '" + a.output + "'");
    out = &out_file;
  }
  const auto stats = ruleids::classify_stream(model, *in, *out);
  ruleids::log_info("classify: " + std::to_string(stats.rows) + " rows, " + std::to_string(stats.unknown) +
                    " unknown");
  return kOk;
}

int run_eval(const ModelArgs& a) {
  const auto model = ruleids::load_model(a.model_dir);
  const auto policy =
      a.unknown_policy.empty() ? model.config.unknown_policy : ruleids::parse_unknown_policy(a.unknown_policy);
  auto options = model.config.load_options();
  options.limit.reset();
  options.csv.layout = model.schema.csv_layout();
  const auto data = ruleids::load_dataset(a.data, model.schema.format, options);
  const auto result = ruleids::evaluate(model, data, policy);
  if (a.tsv && result.binary) {
    std::cout << ruleids::format_metrics_tsv(result.confusion.matrix, result.metrics);
    std::cout << "unknown\t" << result.unknown << "\nexcluded\t" << result.confusion.excluded << '\n';
  } else {
    std::cout << ruleids::format_eval(result, policy);
  }
  return kOk;
}

int run_inspect(const ModelArgs& a) {
  std::cout << ruleids::render_rules(ruleids::load_model(a.model_dir), a.grid);
  return kOk;
}

int run_sample(const SampleArgs& a) {
  ruleids::sample_lines(a.input, ruleids::parse_source_format(a.format), a.train, a.test, a.seed, a.train_out,
                        a.test_out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised rule-based intrusion detection: cluster traffic, extract rules, classify."};
  app.require_subcommand(1);

  ruleids::RunConfig config;
  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Learn a ruleset from unlabeled data and write a model directory");
  train->add_option("data", ta.data, "Training data file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--model-dir", ta.model_dir, "Output model directory")->required();
  train->add_option("--format", ta.format, "Input format: kdd, apache or csv")
      ->check(CLI::IsMember({"kdd", "apache", "csv"}))->capture_default_str();
  train->add_option("--label-column", config.label_column, "CSV column holding ground truth (ignored in training)")
      ->capture_default_str();
  train->add_flag("--user-agent", config.include_user_agent, "Append the user agent to Apache request text");
  train->add_option("--limit", ta.limit, "Train on a seeded random sample of this many records (0: all)")
      ->capture_default_str();
  train->add_option("--train-cap", config.train_cap, "Maximum number of training rows")->capture_default_str();
  train->add_option("--bins", config.n_bins, "Equal-width bins per continuous field")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--ngram", config.ngram_n, "Character n-gram length for text fields")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_flag("--ngram-counts", config.ngram_counts, "Embed n-gram counts instead of presence bits");
  train->add_flag("--skip-embedding", config.skip_embedding, "Cluster the binary features directly");
  train->add_option("--epsilon", ta.epsilon, "Kernel width (0: choose from the weight-sum curve)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--dims", ta.dims, "Embedding dimensions (0: choose from the eigengap)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--epsilon-sample", config.epsilon_sample_size, "Rows sampled for the epsilon scan")
      ->capture_default_str();
  train->add_option("--eigenpairs", config.max_eigenpairs, "Eigenpairs computed before truncation")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_flag("--scaled-eigenvectors", config.scaled_eigenvectors,
                  "Use D^-1/2 scaled eigenvectors for the coordinates");
  train->add_option("--k", ta.k, "Number of clusters (0: choose by silhouette)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--k-min", config.k_min, "Smallest k tried")->capture_default_str();
  train->add_option("--k-max", config.k_max, "Largest k tried")->capture_default_str();
  train->add_option("--restarts", config.restarts, "k-means restarts")->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--seed", config.seed, "Random seed for sampling, k-means and rule order")
      ->capture_default_str();
  train->add_option("--labeling", ta.labeling,
                    "largest-is-normal, per-cluster-classes, manual:<i,j,...> or manual:auto-prompt")
      ->capture_default_str();
  train->add_option("--unknown-policy", ta.unknown_policy, "Default eval treatment of UNKNOWN: as-attack or exclude")
      ->check(CLI::IsMember({"as-attack", "exclude"}))->capture_default_str();
  train->add_flag("-q,--quiet", ta.quiet, "Only print warnings");

  ModelArgs ca;
  auto* classify = app.add_subcommand("classify", "Stream one decision per input row");
  classify->add_option("data", ca.data, "Data file, or - for standard input")->required();
  classify->add_option("-m,--model-dir", ca.model_dir, "Model directory")->required();
  classify->add_option("-o,--output", ca.output, "Write decisions here instead of standard output");

  ModelArgs ea;
  auto* eval = app.add_subcommand("eval", "Classify labeled data and report metrics");
  eval->add_option("data", ea.data, "Labeled data file")->required()->check(CLI::ExistingFile);
  eval->add_option("-m,--model-dir", ea.model_dir, "Model directory")->required();
  eval->add_option("--unknown-policy", ea.unknown_policy, "as-attack or exclude (default: from config.txt)")
      ->check(CLI::IsMember({"as-attack", "exclude"}));
  eval->add_flag("--tsv", ea.tsv, "Print binary metrics as key<TAB>value lines");

  ModelArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Print the ruleset in readable form");
  inspect->add_option("-m,--model-dir", ia.model_dir, "Model directory")->required();
  inspect->add_flag("--grid", ia.grid, "Also print the +/-/· rule grid");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Write disjoint seeded train/test samples of a data file");
  sample->add_option("input", sa.input, "Input data file")->required()->check(CLI::ExistingFile);
  sample->add_option("--format", sa.format, "kdd, apache or csv (csv keeps the header)")
      ->check(CLI::IsMember({"kdd", "apache", "csv"}))->capture_default_str();
  sample->add_option("--train", sa.train, "Training rows")->capture_default_str();
  sample->add_option("--test", sa.test, "Test rows")->capture_default_str();
  sample->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  sample->add_option("--train-out", sa.train_out, "Training sample path")->required();
  sample->add_option("--test-out", sa.test_out, "Test sample path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (ta.quiet) {
    ruleids::set_log_sink([](ruleids::LogLevel level, std::string_view msg) {
      if (level == ruleids::LogLevel::warning) std::cerr << "warning: " << msg << '\n';
    });
  }

  try {
    if (*train) return run_train(ta, config);
    if (*classify) return run_classify(ca);
    if (*eval) return run_eval(ea);
    if (*inspect) return run_inspect(ia);
    if (*sample) return run_sample(sa);
  } catch (const ruleids::ParseError& e) {
    std::cerr << "ingest error: " << e.what() << '\n';
    return kIngest;
  } catch (const ruleids::IngestError& e) {
    std::cerr << "ingest error: " << e.what() << '\n';
    return kIngest;
  } catch (const ruleids::TrainError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kTrain;
  } catch (const ruleids::ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kModel;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
