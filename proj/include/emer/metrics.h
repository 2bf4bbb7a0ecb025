#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emer/label_space.h"

namespace emer {

// Set precision (accuracy_s), set recall (recall_s) and their mean, all as
// fractions in [0, 1].
struct MetricResult {
  double accuracy_s = 0.0;
  double recall_s = 0.0;
  double avg = 0.0;
};

// accuracy_s = |Y ∩ Ŷ| / |Ŷ|, recall_s = |Y ∩ Ŷ| / |Y|, avg = their mean.
// An empty prediction scores 0 on all three. Throws EmptyAnnotation.
MetricResult score_pair(const GroupedLabelSet& annotated, const GroupedLabelSet& predicted);

// Macro average over samples. Throws EmptyCorpus.
MetricResult score_corpus(
    const std::vector<std::pair<GroupedLabelSet, GroupedLabelSet>>& pairs);
MetricResult mean_of(const std::vector<MetricResult>& per_sample);

// Mean and population standard deviation of repeated-run percentages.
struct RunAggregate {
  double mean = 0.0;
  double std = 0.0;
  int n_runs = 0;
  std::vector<double> per_run;

  // "59.47±0.08"
  std::string format() const;
};

// Throws Error("EmptyRuns") on an empty input.
RunAggregate aggregate_runs(const std::vector<double>& per_run_percent);

// Rounds to two decimals with ties to even. Ties are detected on the decimal
// reading of the value (x.xx5 within 1e-9), not on its binary expansion.
double round_percent(double value);
// Two-decimal fixed rendering of round_percent(value): "5.87", "59.47".
std::string format_percent(double value);
// Integer hundredths after round_percent.
long long to_hundredths(double value);

}  // namespace emer
