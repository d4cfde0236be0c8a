#include "ruleids/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ruleids {
namespace {

double ratio(double num, double den, const char* name, std::vector<std::string>& degenerate) {
  if (den == 0.0) {
    degenerate.emplace_back(name);
    return 0.0;
  }
  return num / den;
}

}  // namespace

std::string to_string(UnknownPolicy policy) {
  return policy == UnknownPolicy::as_attack ? "as-attack" : "exclude";
}

UnknownPolicy parse_unknown_policy(std::string_view text) {
  if (text == "as-attack") return UnknownPolicy::as_attack;
  if (text == "exclude") return UnknownPolicy::exclude;
  throw std::invalid_argument("unknown policy '" + std::string(text) + "'");
}

ConfusionResult confusion(std::span<const Verdict> verdicts, std::span<const Truth> truth, UnknownPolicy policy) {
  if (verdicts.size() != truth.size()) {
    throw std::invalid_argument("confusion needs one truth value per verdict");
  }
  ConfusionResult out;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    Verdict v = verdicts[i];
    if (v == Verdict::unknown) {
      if (policy == UnknownPolicy::exclude) {
        ++out.excluded;
        continue;
      }
      v = Verdict::attack;
    }
    const bool predicted_attack = v == Verdict::attack;
    const bool actual_attack = truth[i] == Truth::attack;
    if (predicted_attack && actual_attack) ++out.matrix.tp;
    if (predicted_attack && !actual_attack) ++out.matrix.fp;
    if (!predicted_attack && !actual_attack) ++out.matrix.tn;
    if (!predicted_attack && actual_attack) ++out.matrix.fn;
  }
  return out;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fn = static_cast<double>(cm.fn);
  MetricsReport r;
  r.sensitivity = ratio(tp, tp + fn, "sensitivity", r.degenerate);
  r.fpr = ratio(fp, fp + tn, "fpr", r.degenerate);
  r.specificity = ratio(tn, fp + tn, "specificity", r.degenerate);
  r.accuracy = ratio(tp + tn, tp + fp + fn + tn, "accuracy", r.degenerate);
  r.precision = ratio(tp, tp + fp, "precision", r.degenerate);
  const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  r.mcc = ratio(tp * tn - fp * fn, den, "mcc", r.degenerate);
  return r;
}

std::string format_metrics(const ConfusionMatrix& cm, const MetricsReport& report) {
  char buf[512];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf,
                "                 predicted\n"
                "                 normal       attack\n"
                "actual normal  %10llu   %10llu\n"
                "actual attack  %10llu   %10llu\n\n",
                static_cast<unsigned long long>(cm.tn), static_cast<unsigned long long>(cm.fp),
                static_cast<unsigned long long>(cm.fn), static_cast<unsigned long long>(cm.tp));
  out << buf;
  const std::pair<const char*, double> rows[] = {
      {"Sensitivity (TPR)", report.sensitivity}, {"FPR", report.fpr},
      {"Specificity (TNR)", report.specificity}, {"Accuracy", report.accuracy},
      {"Precision", report.precision},           {"Matthews corr. coef.", report.mcc},
  };
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof buf, "%-22s %7.2f %%\n", name, 100.0 * value);
    out << buf;
  }
  if (report.is_degenerate()) {
    out << "degenerate (zero denominator):";
    for (const auto& d : report.degenerate) out << ' ' << d;
    out << '\n';
  }
  return out.str();
}

std::string format_metrics_tsv(const ConfusionMatrix& cm, const MetricsReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "tp\t" << cm.tp << "\nfp\t" << cm.fp << "\ntn\t" << cm.tn << "\nfn\t" << cm.fn << '\n';
  out << "sensitivity\t" << report.sensitivity << "\nfpr\t" << report.fpr << "\nspecificity\t"
      << report.specificity << "\naccuracy\t" << report.accuracy << "\nprecision\t" << report.precision
      << "\nmcc\t" << report.mcc << '\n';
  out << "degenerate\t" << (report.is_degenerate() ? 1 : 0) << '\n';
  return out.str();
}

std::size_t MultiClassConfusion::index_of(std::vector<std::string>& classes, const std::string& name) {
  auto it = std::find(classes.begin(), classes.end(), name);
  if (it != classes.end()) return static_cast<std::size_t>(it - classes.begin());
  classes.push_back(name);
  return classes.size() - 1;
}

void MultiClassConfusion::add(const std::string& truth, const std::string* predicted) {
  std::size_t t = index_of(truth_classes_, truth);
  if (t >= counts_.size()) {
    counts_.resize(t + 1);
    unknown_.resize(t + 1, 0);
  }
  if (!predicted) {
    ++unknown_[t];
    return;
  }
  std::size_t p = index_of(predicted_classes_, *predicted);
  if (counts_[t].size() <= p) counts_[t].resize(p + 1, 0);
  ++counts_[t][p];
}

std::uint64_t MultiClassConfusion::count(std::size_t truth, std::size_t predicted) const {
  if (truth >= counts_.size() || predicted >= counts_[truth].size()) return 0;
  return counts_[truth][predicted];
}

std::uint64_t MultiClassConfusion::unknown(std::size_t truth) const {
  return truth < unknown_.size() ? unknown_[truth] : 0;
}

std::string MultiClassConfusion::format() const {
  std::ostringstream out;
  out << "actual\\predicted";
  for (const auto& p : predicted_classes_) out << '\t' << p;
  out << "\tUNKNOWN\n";
  for (std::size_t t = 0; t < truth_classes_.size(); ++t) {
    out << truth_classes_[t];
    for (std::size_t p = 0; p < predicted_classes_.size(); ++p) out << '\t' << count(t, p);
    out << '\t' << unknown(t) << '\n';
  }
  return out.str();
}

}  // namespace ruleids
