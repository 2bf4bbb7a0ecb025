#include "emer/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>

#include "emer/errors.h"

namespace emer {

MetricResult score_pair(const GroupedLabelSet& annotated, const GroupedLabelSet& predicted) {
  if (annotated.empty()) throw EmptyAnnotation();
  MetricResult result;
  if (predicted.empty()) return result;

  std::size_t overlap = 0;
  for (GroupId id : predicted.group_ids) overlap += annotated.group_ids.count(id);

  result.accuracy_s = static_cast<double>(overlap) / static_cast<double>(predicted.size());
  result.recall_s = static_cast<double>(overlap) / static_cast<double>(annotated.size());
  result.avg = (result.accuracy_s + result.recall_s) / 2.0;
  return result;
}

MetricResult mean_of(const std::vector<MetricResult>& per_sample) {
  if (per_sample.empty()) throw EmptyCorpus();
  // Summed in input order so the result does not depend on scheduling.
  double accuracy = 0.0;
  double recall = 0.0;
  for (const auto& r : per_sample) {
    accuracy += r.accuracy_s;
    recall += r.recall_s;
  }
  const auto n = static_cast<double>(per_sample.size());
  MetricResult result;
  result.accuracy_s = accuracy / n;
  result.recall_s = recall / n;
  result.avg = (result.accuracy_s + result.recall_s) / 2.0;
  return result;
}

MetricResult score_corpus(
    const std::vector<std::pair<GroupedLabelSet, GroupedLabelSet>>& pairs) {
  if (pairs.empty()) throw EmptyCorpus();
  std::vector<MetricResult> per_sample;
  per_sample.reserve(pairs.size());
  for (const auto& [annotated, predicted] : pairs) {
    per_sample.push_back(score_pair(annotated, predicted));
  }
  return mean_of(per_sample);
}

RunAggregate aggregate_runs(const std::vector<double>& per_run_percent) {
  if (per_run_percent.empty()) throw Error("EmptyRuns", "no runs to aggregate");
  RunAggregate agg;
  agg.per_run = per_run_percent;
  agg.n_runs = static_cast<int>(per_run_percent.size());
  const auto n = static_cast<double>(agg.n_runs);
  double sum = 0.0;
  for (double v : per_run_percent) sum += v;
  agg.mean = sum / n;
  if (agg.n_runs > 1) {
    double squares = 0.0;
    for (double v : per_run_percent) squares += (v - agg.mean) * (v - agg.mean);
    agg.std = std::sqrt(squares / n);
  }
  return agg;
}

std::string RunAggregate::format() const {
  return format_percent(mean) + "\xC2\xB1" + format_percent(std);
}

long long to_hundredths(double value) {
  const double scaled = value * 100.0;
  const double floor = std::floor(scaled);
  const double frac = scaled - floor;
  auto base = static_cast<long long>(floor);
  if (std::fabs(frac - 0.5) < 1e-9 * std::max(1.0, std::fabs(scaled))) {
    return (base % 2 == 0) ? base : base + 1;
  }
  return static_cast<long long>(std::llround(scaled));
}

double round_percent(double value) {
  return static_cast<double>(to_hundredths(value)) / 100.0;
}

std::string format_percent(double value) {
  long long cents = to_hundredths(value);
  const bool negative = cents < 0;
  if (negative) cents = -cents;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", negative ? "-" : "", cents / 100,
                cents % 100);
  return buf;
}

}  // namespace emer
