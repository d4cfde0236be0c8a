#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ruleids/metrics.hpp"

namespace ruleids {
namespace {

struct Expected {
  double sensitivity, fpr, specificity, accuracy, precision, mcc;  // percent
};

void expect_percentages(const MetricsReport& r, const Expected& e, double tol_pp) {
  EXPECT_NEAR(100 * r.sensitivity, e.sensitivity, tol_pp);
  EXPECT_NEAR(100 * r.fpr, e.fpr, tol_pp);
  EXPECT_NEAR(100 * r.specificity, e.specificity, tol_pp);
  EXPECT_NEAR(100 * r.accuracy, e.accuracy, tol_pp);
  EXPECT_NEAR(100 * r.precision, e.precision, tol_pp);
  EXPECT_NEAR(100 * r.mcc, e.mcc, tol_pp);
}

TEST(Metrics, FiveThousandLineTable) {
  ConfusionMatrix cm{.tp = 3978, .fp = 12, .tn = 947, .fn = 63};
  MetricsReport r = compute_metrics(cm);
  expect_percentages(r, {98.44, 1.25, 98.75, 98.50, 99.70, 95.31}, 0.005);
  EXPECT_FALSE(r.is_degenerate());
}

TEST(Metrics, WholeTenPercentTable) {
  ConfusionMatrix cm{.tp = 371135, .fp = 5162, .tn = 87228, .fn = 5795};
  expect_percentages(compute_metrics(cm), {98.46, 5.59, 94.41, 97.67, 98.63, 92.64}, 0.005);
}

TEST(Metrics, HandComputedValues) {
  // tp=3, fp=1, tn=4, fn=2: MCC = (12-2)/sqrt(4*5*5*6) = 10/sqrt(600)
  MetricsReport r = compute_metrics({.tp = 3, .fp = 1, .tn = 4, .fn = 2});
  EXPECT_DOUBLE_EQ(r.sensitivity, 0.6);
  EXPECT_DOUBLE_EQ(r.fpr, 0.2);
  EXPECT_DOUBLE_EQ(r.specificity, 0.8);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_NEAR(r.mcc, 10 / std::sqrt(600.0), 1e-15);
}

TEST(Metrics, PerfectAndInverted) {
  MetricsReport perfect = compute_metrics({.tp = 10, .fp = 0, .tn = 5, .fn = 0});
  EXPECT_EQ(perfect.sensitivity, 1.0);
  EXPECT_EQ(perfect.fpr, 0.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(perfect.mcc, 1.0);
  EXPECT_DOUBLE_EQ(compute_metrics({.tp = 0, .fp = 5, .tn = 0, .fn = 10}).mcc, -1.0);
}

TEST(Metrics, SpecificityComplementsFpr) {
  for (auto cm : {ConfusionMatrix{1, 2, 3, 4}, ConfusionMatrix{100, 7, 900, 3}, ConfusionMatrix{5, 5, 5, 5}}) {
    MetricsReport r = compute_metrics(cm);
    EXPECT_NEAR(r.specificity, 1 - r.fpr, 1e-15);
  }
}

TEST(Metrics, MccSymmetricUnderClassSwap) {
  ConfusionMatrix cm{.tp = 40, .fp = 7, .tn = 30, .fn = 3};
  ConfusionMatrix swapped{.tp = cm.tn, .fp = cm.fn, .tn = cm.tp, .fn = cm.fp};
  EXPECT_NEAR(compute_metrics(cm).mcc, compute_metrics(swapped).mcc, 1e-15);
}

TEST(Metrics, ZeroDenominatorsFlagged) {
  MetricsReport r = compute_metrics({});
  EXPECT_TRUE(r.is_degenerate());
  EXPECT_EQ(r.degenerate.size(), 6u);
  EXPECT_EQ(r.mcc, 0.0);
  MetricsReport no_normals = compute_metrics({.tp = 5, .fp = 0, .tn = 0, .fn = 1});
  EXPECT_EQ(no_normals.fpr, 0.0);
  EXPECT_NE(std::find(no_normals.degenerate.begin(), no_normals.degenerate.end(), "fpr"),
            no_normals.degenerate.end());
  EXPECT_NE(format_metrics({}, r).find("degenerate"), std::string::npos);
}

TEST(Confusion, UnknownPolicies) {
  std::vector<Verdict> v = {Verdict::normal, Verdict::attack, Verdict::unknown, Verdict::unknown, Verdict::normal};
  std::vector<Truth> t = {Truth::normal, Truth::attack, Truth::attack, Truth::normal, Truth::attack};
  ConfusionResult as_attack = confusion(v, t, UnknownPolicy::as_attack);
  EXPECT_EQ(as_attack.matrix, (ConfusionMatrix{.tp = 2, .fp = 1, .tn = 1, .fn = 1}));
  EXPECT_EQ(as_attack.excluded, 0u);
  ConfusionResult excl = confusion(v, t, UnknownPolicy::exclude);
  EXPECT_EQ(excl.matrix, (ConfusionMatrix{.tp = 1, .fp = 0, .tn = 1, .fn = 1}));
  EXPECT_EQ(excl.excluded, 2u);
}

TEST(Confusion, AllUnknownUnderAsAttack) {
  std::vector<Verdict> v(4, Verdict::unknown);
  std::vector<Truth> t = {Truth::normal, Truth::normal, Truth::attack, Truth::attack};
  ConfusionResult c = confusion(v, t);
  EXPECT_EQ(c.matrix.tp, 2u);
  EXPECT_EQ(c.matrix.fp, 2u);
  EXPECT_EQ(compute_metrics(c.matrix).sensitivity, 1.0);
  EXPECT_EQ(compute_metrics(c.matrix).fpr, 1.0);
}

TEST(Confusion, LengthMismatch) {
  std::vector<Verdict> v(2, Verdict::normal);
  std::vector<Truth> t(3, Truth::normal);
  EXPECT_THROW(confusion(v, t), std::invalid_argument);
}

TEST(Confusion, PolicyNames) {
  for (auto p : {UnknownPolicy::as_attack, UnknownPolicy::exclude}) EXPECT_EQ(parse_unknown_policy(to_string(p)), p);
  EXPECT_THROW(parse_unknown_policy("drop"), std::invalid_argument);
}

TEST(MultiClass, CountsAndUnknownColumn) {
  MultiClassConfusion m;
  const std::string a = "1", b = "2";
  m.add("setosa", &a);
  m.add("setosa", &a);
  m.add("virginica", &b);
  m.add("virginica", nullptr);
  m.add("virginica", &a);
  EXPECT_EQ(m.truth_classes(), (std::vector<std::string>{"setosa", "virginica"}));
  EXPECT_EQ(m.predicted_classes(), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(m.count(0, 0), 2u);
  EXPECT_EQ(m.count(0, 1), 0u);
  EXPECT_EQ(m.count(1, 0), 1u);
  EXPECT_EQ(m.count(1, 1), 1u);
  EXPECT_EQ(m.unknown(1), 1u);
  EXPECT_EQ(m.format(), "actual\\predicted\t1\t2\tUNKNOWN\nsetosa\t2\t0\t0\nvirginica\t1\t1\t1\n");
}

TEST(Format, TsvHasAllKeys) {
  ConfusionMatrix cm{.tp = 3978, .fp = 12, .tn = 947, .fn = 63};
  std::string tsv = format_metrics_tsv(cm, compute_metrics(cm));
  for (const char* key : {"tp\t3978", "fp\t12", "tn\t947", "fn\t63", "sensitivity\t", "mcc\t", "degenerate\t0"})
    EXPECT_NE(tsv.find(key), std::string::npos) << key;
  std::string text = format_metrics(cm, compute_metrics(cm));
  EXPECT_NE(text.find("98.44 %"), std::string::npos);
  EXPECT_NE(text.find("95.31 %"), std::string::npos);
}

}  // namespace
}  // namespace ruleids
