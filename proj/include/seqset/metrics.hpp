#pragma once

#include <cstddef>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seqset/errors.hpp"

namespace seqset {

struct EvalReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double duplicate_rate = 0.0;
};

// Micro-averaged precision/recall/F1 over (predicted, gold) set pairs: counts
// are summed across all pairs before the ratios are taken. Zero denominators
// yield zero, never NaN.
//
// With dedup_predictions (the default) predictions are reduced to their
// distinct elements first. Without it, repeated predictions of a gold herb
// count as false positives beyond the first hit, making repetition directly
// visible in precision.
template <typename Token>
EvalReport micro_prf(
    const std::vector<std::pair<std::vector<Token>, std::vector<Token>>>& pairs,
    bool dedup_predictions = true) {
  if (pairs.empty()) throw InputError("micro_prf: no evaluation pairs");
  EvalReport report;
  for (const auto& [predicted, gold] : pairs) {
    const std::set<Token> gold_set(gold.begin(), gold.end());
    if (gold_set.empty())
      throw ContractError("micro_prf: empty gold set");
    const std::set<Token> pred_set(predicted.begin(), predicted.end());
    std::size_t hits = 0;
    for (const auto& p : pred_set)
      if (gold_set.count(p)) ++hits;
    report.tp += hits;
    report.fn += gold_set.size() - hits;
    report.fp += (dedup_predictions ? pred_set.size() : predicted.size()) - hits;
  }
  if (report.tp + report.fp > 0)
    report.precision = static_cast<double>(report.tp) /
                       static_cast<double>(report.tp + report.fp);
  if (report.tp + report.fn > 0)
    report.recall = static_cast<double>(report.tp) /
                    static_cast<double>(report.tp + report.fn);
  if (report.precision + report.recall > 0.0)
    report.f1 = 2.0 * report.precision * report.recall /
                (report.precision + report.recall);
  return report;
}

// Share of raw emissions that are repeats of an earlier emission within the
// same sequence: sum_i (len_i - unique_i) / sum_i len_i. Zero when nothing
// was emitted at all.
template <typename Token>
double repetition_rate(const std::vector<std::vector<Token>>& emissions) {
  std::size_t total = 0, repeats = 0;
  for (const auto& seq : emissions) {
    total += seq.size();
    const std::set<Token> unique(seq.begin(), seq.end());
    repeats += seq.size() - unique.size();
  }
  return total == 0 ? 0.0
                    : static_cast<double>(repeats) / static_cast<double>(total);
}

inline std::string format_report(const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "tp=%zu fp=%zu fn=%zu\n"
                "precision=%.6f recall=%.6f f1=%.6f duplicate_rate=%.6f",
                report.tp, report.fp, report.fn, report.precision,
                report.recall, report.f1, report.duplicate_rate);
  return buf;
}

}  // namespace seqset
