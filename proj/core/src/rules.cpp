#include "ruleids/rules.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ruleids/error.hpp"
#include "ruleids/features.hpp"

namespace ruleids {
namespace {

bool masked_match(const Word* ones, const Word* zeros, std::span<const Word> row) {
  for (std::size_t w = 0; w < row.size(); ++w) {
    if ((row[w] & ones[w]) != ones[w] || (row[w] & zeros[w]) != 0) return false;
  }
  return true;
}

void compile(const ConjunctiveRule& rule, std::size_t words, Word* ones, Word* zeros) {
  std::fill(ones, ones + words, Word{0});
  std::fill(zeros, zeros + words, Word{0});
  for (std::size_t c = 0; c < rule.mask.size(); ++c) {
    if (rule.mask[c] == Literal::must_be_one) ones[c / kWordBits] |= Word{1} << (c % kWordBits);
    if (rule.mask[c] == Literal::must_be_zero) zeros[c / kWordBits] |= Word{1} << (c % kWordBits);
  }
}

std::string row_key(std::span<const Word> row) {
  return std::string(reinterpret_cast<const char*>(row.data()), row.size_bytes());
}

}  // namespace

std::size_t ConjunctiveRule::literal_count() const {
  return static_cast<std::size_t>(
      std::count_if(mask.begin(), mask.end(), [](Literal l) { return l != Literal::any; }));
}

bool matches(const ConjunctiveRule& rule, std::span<const std::uint8_t> x) {
  if (x.size() != rule.mask.size()) {
    throw std::invalid_argument("rule has " + std::to_string(rule.mask.size()) + " columns, row has " +
                                std::to_string(x.size()));
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (rule.mask[j] == Literal::must_be_one && x[j] != 1) return false;
    if (rule.mask[j] == Literal::must_be_zero && x[j] != 0) return false;
  }
  return true;
}

std::vector<std::string> RuleSet::classes() const {
  std::vector<std::string> out;
  for (const auto& r : rules) {
    if (std::find(out.begin(), out.end(), r.label) == out.end()) out.push_back(r.label);
  }
  return out;
}

std::size_t RuleSet::count_for(std::string_view label) const {
  return static_cast<std::size_t>(
      std::count_if(rules.begin(), rules.end(), [&](const ConjunctiveRule& r) { return r.label == label; }));
}

RuleMatcher::RuleMatcher(const RuleSet& rules)
    : rules_(&rules), words_(words_for(rules.column_count())) {
  ones_.resize(rules.rules.size() * words_);
  zeros_.resize(rules.rules.size() * words_);
  for (std::size_t r = 0; r < rules.rules.size(); ++r) {
    if (rules.rules[r].mask.size() != rules.column_count()) {
      throw ModelError("rule " + std::to_string(r + 1) + " has the wrong number of columns");
    }
    compile(rules.rules[r], words_, ones_.data() + r * words_, zeros_.data() + r * words_);
  }
}

bool RuleMatcher::rule_matches(std::size_t rule, std::span<const Word> row) const {
  return masked_match(ones_.data() + rule * words_, zeros_.data() + rule * words_, row);
}

std::optional<std::size_t> RuleMatcher::first_match(std::span<const Word> row) const {
  if (row.size() != words_) throw std::invalid_argument("row width does not match the ruleset");
  for (std::size_t r = 0; r < rules_->rules.size(); ++r) {
    if (rule_matches(r, row)) return r;
  }
  return std::nullopt;
}

ClassDecision RuleMatcher::classify(std::span<const Word> row) const {
  if (row.size() != words_) throw std::invalid_argument("row width does not match the ruleset");
  ClassDecision d;
  for (std::size_t r = 0; r < rules_->rules.size(); ++r) {
    if (!rule_matches(r, row)) continue;
    if (!d.rule) {
      d.rule = r;
      d.label = rules_->rules[r].label;
    }
    ++d.match_count;
  }
  return d;
}

RuleSet extract_rules(const BinaryFeatureMatrix& x, std::span<const std::string> labels,
                      std::span<const std::string> column_names, std::uint64_t seed) {
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  if (labels.size() != n) throw std::invalid_argument("one label per training row required");
  if (column_names.size() != m) throw std::invalid_argument("one name per column required");
  if (n == 0) throw TrainError("cannot extract rules from an empty training set");

  {
    std::unordered_map<std::string, std::size_t> first_seen;
    for (std::size_t r = 0; r < n; ++r) {
      auto [it, inserted] = first_seen.emplace(row_key(x.row(r)), r);
      if (!inserted && labels[it->second] != labels[r]) {
        throw TrainError("training rows " + std::to_string(it->second + 1) + " and " + std::to_string(r + 1) +
                         " are identical but labeled '" + labels[it->second] + "' and '" + labels[r] + "'");
      }
    }
  }

  // Rows of any class other than `label`, computed once per class.
  std::unordered_map<std::string, std::vector<std::size_t>> others_of;
  auto others = [&](const std::string& label) -> const std::vector<std::size_t>& {
    auto it = others_of.find(label);
    if (it != others_of.end()) return it->second;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < n; ++r) {
      if (labels[r] != label) rows.push_back(r);
    }
    return others_of.emplace(label, std::move(rows)).first->second;
  };

  RuleSet out;
  out.column_names.assign(column_names.begin(), column_names.end());
  out.fingerprint = fingerprint_of(out.column_names);

  const std::size_t words = x.words_per_row();
  std::vector<Word> ones_all;
  std::vector<Word> zeros_all;
  auto covered = [&](std::span<const Word> row) {
    for (std::size_t r = 0; r < out.rules.size(); ++r) {
      if (masked_match(ones_all.data() + r * words, zeros_all.data() + r * words, row)) return true;
    }
    return false;
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Word> ones(words);
  std::vector<Word> zeros(words);
  for (std::size_t e : order) {
    // Every rule covers a single class, so any match is a same-class match.
    if (covered(x.row(e))) continue;
    const std::string& label = labels[e];
    const auto& foreign = others(label);

    auto row = x.row(e);
    for (std::size_t w = 0; w < words; ++w) {
      ones[w] = row[w];
      zeros[w] = ~row[w];
    }
    if (m % kWordBits != 0) zeros[words - 1] &= (Word{1} << (m % kWordBits)) - 1;

    auto foreign_covered = [&] {
      return std::any_of(foreign.begin(), foreign.end(),
                         [&](std::size_t r) { return masked_match(ones.data(), zeros.data(), x.row(r)); });
    };

    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t w = c / kWordBits;
      const Word bit = Word{1} << (c % kWordBits);
      Word& target = (ones[w] & bit) ? ones[w] : zeros[w];
      target &= ~bit;
      if (foreign_covered()) target |= bit;
    }

    ConjunctiveRule rule;
    rule.label = label;
    rule.origin = e;
    rule.mask.assign(m, Literal::any);
    for (std::size_t c = 0; c < m; ++c) {
      const Word bit = Word{1} << (c % kWordBits);
      if (ones[c / kWordBits] & bit) rule.mask[c] = Literal::must_be_one;
      if (zeros[c / kWordBits] & bit) rule.mask[c] = Literal::must_be_zero;
    }
    out.rules.push_back(std::move(rule));
    ones_all.insert(ones_all.end(), ones.begin(), ones.end());
    zeros_all.insert(zeros_all.end(), zeros.begin(), zeros.end());
  }
  return out;
}

void check_compatible(const RuleSet& rules, std::uint64_t schema_fingerprint) {
  if (rules.fingerprint != schema_fingerprint) {
    throw ModelError("ruleset was built for schema " + fingerprint_hex(rules.fingerprint) +
                     ", data uses schema " + fingerprint_hex(schema_fingerprint));
  }
}

ClassDecision classify(const RuleSet& rules, const BinaryFeatureMatrix& x, std::size_t row) {
  if (x.cols() != rules.column_count()) {
    throw ModelError("feature matrix has " + std::to_string(x.cols()) + " columns, ruleset expects " +
                     std::to_string(rules.column_count()));
  }
  return RuleMatcher(rules).classify(x.row(row));
}

std::string serialize_ruleset(const RuleSet& rules) {
  std::ostringstream out;
  out << "RULESET v1\n";
  out << "schema " << fingerprint_hex(rules.fingerprint) << '\n';
  out << "columns " << rules.column_names.size() << '\n';
  for (std::size_t i = 0; i < rules.column_names.size(); ++i) {
    out << "col " << i << ' ' << rules.column_names[i] << '\n';
  }
  for (const auto& r : rules.rules) {
    out << r.label << '\t';
    bool first = true;
    for (std::size_t c = 0; c < r.mask.size(); ++c) {
      if (r.mask[c] == Literal::any) continue;
      if (!first) out << ' ';
      out << (r.mask[c] == Literal::must_be_one ? '+' : '-') << c;
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

RuleSet parse_ruleset(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) throw ParseError("missing final newline", lines.size() + 1);
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  auto parse_size = [](std::string_view s, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ParseError("expected a number, got '" + std::string(s) + "'", line);
    }
    return v;
  };
  auto expect_prefix = [&](std::size_t i, std::string_view prefix) {
    if (i >= lines.size()) throw ParseError("truncated ruleset, expected '" + std::string(prefix) + "'", i + 1);
    if (lines[i].substr(0, prefix.size()) != prefix) {
      throw ParseError("expected '" + std::string(prefix) + "'", i + 1);
    }
    return lines[i].substr(prefix.size());
  };

  if (lines.empty()) throw ParseError("empty ruleset file", 1);
  if (lines[0] != "RULESET v1") {
    throw ParseError(lines[0].substr(0, 8) == "RULESET " ? "unsupported ruleset version" : "not a ruleset file", 1);
  }
  RuleSet rules;
  std::string_view hex = expect_prefix(1, "schema ");
  if (hex.size() != 16 || hex.find_first_not_of("0123456789abcdef") != std::string_view::npos) {
    throw ParseError("schema fingerprint must be 16 lowercase hex digits", 2);
  }
  std::from_chars(hex.data(), hex.data() + hex.size(), rules.fingerprint, 16);

  const std::size_t m = parse_size(expect_prefix(2, "columns "), 3);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t line = 3 + i;
    std::string_view rest = expect_prefix(line, "col ");
    std::size_t space = rest.find(' ');
    if (space == std::string_view::npos || space + 1 >= rest.size()) throw ParseError("malformed col line", line + 1);
    if (parse_size(rest.substr(0, space), line + 1) != i) throw ParseError("column index out of order", line + 1);
    rules.column_names.emplace_back(rest.substr(space + 1));
  }
  if (fingerprint_of(rules.column_names) != rules.fingerprint) {
    throw ParseError("schema fingerprint does not match the column names", 2);
  }

  for (std::size_t i = 3 + m; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    std::size_t tab = line.find('\t');
    if (tab == 0 || tab == std::string_view::npos) throw ParseError("rule line needs '<class>\\t<terms>'", i + 1);
    ConjunctiveRule rule;
    rule.label = std::string(line.substr(0, tab));
    rule.mask.assign(m, Literal::any);
    std::string_view terms = line.substr(tab + 1);
    std::optional<std::size_t> previous;
    while (!terms.empty()) {
      std::size_t space = terms.find(' ');
      std::string_view term = terms.substr(0, space);
      if (term.size() < 2 || (term[0] != '+' && term[0] != '-')) {
        throw ParseError("bad rule term '" + std::string(term) + "'", i + 1);
      }
      std::size_t c = parse_size(term.substr(1), i + 1);
      if (c >= m) throw ParseError("rule term refers to column " + std::to_string(c), i + 1);
      if (previous && c <= *previous) throw ParseError("rule terms must be in ascending column order", i + 1);
      previous = c;
      rule.mask[c] = term[0] == '+' ? Literal::must_be_one : Literal::must_be_zero;
      terms = space == std::string_view::npos ? std::string_view{} : terms.substr(space + 1);
      if (space != std::string_view::npos && terms.empty()) throw ParseError("trailing space in rule", i + 1);
    }
    rules.rules.push_back(std::move(rule));
  }
  return rules;
}

}  // namespace ruleids
