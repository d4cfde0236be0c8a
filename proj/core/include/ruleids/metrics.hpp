#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ruleids {

// Attacks are the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

enum class Truth : std::uint8_t { normal, attack };
enum class Verdict : std::uint8_t { normal, attack, unknown };

enum class UnknownPolicy { as_attack, exclude };

std::string to_string(UnknownPolicy policy);
// "as-attack" or "exclude"; throws std::invalid_argument otherwise.
UnknownPolicy parse_unknown_policy(std::string_view text);

struct ConfusionResult {
  ConfusionMatrix matrix;
  std::size_t excluded = 0;  // unknown verdicts dropped under `exclude`
};

ConfusionResult confusion(std::span<const Verdict> verdicts, std::span<const Truth> truth,
                          UnknownPolicy policy = UnknownPolicy::as_attack);

struct MetricsReport {
  double sensitivity = 0.0;
  double fpr = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double mcc = 0.0;
  // Names of metrics whose denominator was zero (reported as 0).
  std::vector<std::string> degenerate;

  bool is_degenerate() const noexcept { return !degenerate.empty(); }
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Aligned human-readable block (percentages) and key<TAB>value lines.
std::string format_metrics(const ConfusionMatrix& cm, const MetricsReport& report);
std::string format_metrics_tsv(const ConfusionMatrix& cm, const MetricsReport& report);

// k x k count table for multi-class outcomes. Rows are true classes,
// columns predicted classes plus a trailing UNKNOWN column.
class MultiClassConfusion {
 public:
  void add(const std::string& truth, const std::string* predicted);

  const std::vector<std::string>& truth_classes() const noexcept { return truth_classes_; }
  const std::vector<std::string>& predicted_classes() const noexcept { return predicted_classes_; }
  std::uint64_t count(std::size_t truth, std::size_t predicted) const;
  std::uint64_t unknown(std::size_t truth) const;
  std::string format() const;

 private:
  std::size_t index_of(std::vector<std::string>& classes, const std::string& name);

  std::vector<std::string> truth_classes_;
  std::vector<std::string> predicted_classes_;
  // counts_[truth][predicted]; the last predicted slot per row is unknown.
  std::vector<std::vector<std::uint64_t>> counts_;
  std::vector<std::uint64_t> unknown_;
};

}  // namespace ruleids
