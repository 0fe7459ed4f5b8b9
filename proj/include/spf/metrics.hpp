#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Per-label ROC AUC with midrank tie handling, macro / prevalence-weighted
// aggregation, and percentile bootstrap confidence intervals.

namespace spf {

// Rank-based AUC equal to P(score+ > score-) + 0.5 * P(tie). Returns
// nullopt when the labels contain only one class (undefined, neither 0
// nor 0.5).
std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct LabelAuc {
  std::string name;
  std::optional<double> auc;  // empty when the label has no positives or no negatives
  int positives = 0;
};

struct MetricsReport {
  std::vector<LabelAuc> per_label;
  double macro_auc = 0.0;     // unweighted mean over defined labels
  double weighted_auc = 0.0;  // positive-count weighted mean over defined labels
  int defined_labels = 0;
  std::optional<std::pair<double, double>> macro_ci;
  std::optional<std::pair<double, double>> weighted_ci;
  int n_bootstrap = 0;
  std::uint64_t bootstrap_seed = 0;
};

// Row-major score/label matrices: one row per example, one column per label.
struct EvalData {
  int n_examples = 0;
  int n_labels = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  double score(int row, int col) const { return scores[static_cast<std::size_t>(row) * n_labels + col]; }
  int label(int row, int col) const { return labels[static_cast<std::size_t>(row) * n_labels + col]; }
};

double macro_auc(const std::vector<LabelAuc>& per_label);
double weighted_auc(const std::vector<LabelAuc>& per_label);

MetricsReport compute_metrics(const EvalData& data, const std::vector<std::string>& label_names);

enum class Aggregate { Macro, Weighted };

// Percentile interval over n example-level resamples with replacement.
// Resamples whose labels all degenerate to one class are skipped.
std::pair<double, double> bootstrap_ci(const EvalData& data, Aggregate aggregate, int n_resamples,
                                       double alpha, std::uint64_t seed);

// CSV: label,auc,positives rows, then MACRO and WEIGHTED aggregate rows.
// CI columns appear when the report carries intervals.
void write_metrics_csv(const std::string& path, const MetricsReport& report);

}  // namespace spf
