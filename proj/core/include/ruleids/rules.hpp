#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ruleids/bit_matrix.hpp"

namespace ruleids {

// Literal of a conjunctive rule over one binary column.
enum class Literal : std::int8_t { must_be_zero = -1, any = 0, must_be_one = 1 };

struct ConjunctiveRule {
  std::string label;           // class the rule predicts
  std::vector<Literal> mask;   // one literal per feature column
  std::size_t origin = 0;      // training row the rule was grown from

  std::size_t literal_count() const;
  friend bool operator==(const ConjunctiveRule&, const ConjunctiveRule&) = default;
};

// True iff x satisfies every literal. Throws std::invalid_argument on a
// length mismatch.
bool matches(const ConjunctiveRule& rule, std::span<const std::uint8_t> x);

struct RuleSet {
  std::vector<ConjunctiveRule> rules;  // match order
  std::vector<std::string> column_names;
  std::uint64_t fingerprint = 0;       // fingerprint_of(column_names)

  std::size_t column_count() const noexcept { return column_names.size(); }
  // Class tokens in order of first appearance among the rules.
  std::vector<std::string> classes() const;
  std::size_t count_for(std::string_view label) const;

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

struct ClassDecision {
  std::optional<std::size_t> rule;  // 0-based index of the first matching rule
  std::string_view label;           // empty when unknown; views the RuleSet
  std::size_t match_count = 0;

  bool unknown() const noexcept { return !rule.has_value(); }
};

// A RuleSet compiled to bit masks. Immutable once built; safe to share
// between threads as long as the RuleSet outlives it.
class RuleMatcher {
 public:
  explicit RuleMatcher(const RuleSet& rules);

  std::size_t words_per_row() const noexcept { return words_; }

  ClassDecision classify(std::span<const Word> row) const;
  std::optional<std::size_t> first_match(std::span<const Word> row) const;
  bool rule_matches(std::size_t rule, std::span<const Word> row) const;

 private:
  const RuleSet* rules_;
  std::size_t words_;
  std::vector<Word> ones_;   // rules x words
  std::vector<Word> zeros_;  // rules x words
};

// Grows one rule per uncovered training row, visiting rows in a seeded
// shuffled order. Each seed rule fixes every column to the row's value; its
// literals are then dropped in ascending column order whenever the relaxed
// rule still covers only rows of the seed row's class. Throws TrainError for
// identical rows with different classes.
RuleSet extract_rules(const BinaryFeatureMatrix& x, std::span<const std::string> labels,
                      std::span<const std::string> column_names, std::uint64_t seed);

// Throws ModelError unless the ruleset was built for these columns.
void check_compatible(const RuleSet& rules, std::uint64_t schema_fingerprint);

ClassDecision classify(const RuleSet& rules, const BinaryFeatureMatrix& x, std::size_t row);

// Line format:
//   RULESET v1
//   schema <16 hex digits>
//   columns <m>
//   col <i> <name>          (m lines)
//   <class>\t<terms>        (one per rule; terms "+i"/"-i", ascending, space separated)
std::string serialize_ruleset(const RuleSet& rules);
// Throws ParseError with the line number.
RuleSet parse_ruleset(std::string_view text);

}  // namespace ruleids
