#include "spf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "spf/error.hpp"
#include "spf/prng.hpp"

namespace spf {

std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ShapeError("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ShapeError("roc_auc: labels must be 0/1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; rank sum of positives gives the
  // Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j;
  }
  const double p = static_cast<double>(pos), m = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * m);
}

double macro_auc(const std::vector<LabelAuc>& per_label) {
  double sum = 0.0;
  int defined = 0;
  for (const auto& l : per_label)
    if (l.auc) {
      sum += *l.auc;
      ++defined;
    }
  if (defined == 0) throw Error("macro_auc: no label has a defined AUC");
  return sum / static_cast<double>(defined);
}

double weighted_auc(const std::vector<LabelAuc>& per_label) {
  double sum = 0.0, wsum = 0.0;
  for (const auto& l : per_label)
    if (l.auc) {
      sum += static_cast<double>(l.positives) * *l.auc;
      wsum += static_cast<double>(l.positives);
    }
  if (wsum == 0.0) throw Error("weighted_auc: no label has a defined AUC");
  return sum / wsum;
}

namespace {

std::vector<LabelAuc> per_label_aucs(const EvalData& data, const std::vector<int>& rows,
                                     const std::vector<std::string>* names) {
  std::vector<LabelAuc> out;
  out.reserve(static_cast<std::size_t>(data.n_labels));
  std::vector<double> s(rows.size());
  std::vector<int> y(rows.size());
  for (int col = 0; col < data.n_labels; ++col) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s[r] = data.score(rows[r], col);
      y[r] = data.label(rows[r], col);
    }
    LabelAuc l;
    if (names) l.name = (*names)[static_cast<std::size_t>(col)];
    l.positives = std::accumulate(y.begin(), y.end(), 0);
    l.auc = roc_auc(s, y);
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<int> all_rows(int n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Type-7 (linear interpolation) percentile of sorted values.
double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error("percentile: empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

MetricsReport compute_metrics(const EvalData& data, const std::vector<std::string>& label_names) {
  if (data.n_labels != static_cast<int>(label_names.size()))
    throw ShapeError("metrics: " + std::to_string(data.n_labels) + " score columns vs " +
                     std::to_string(label_names.size()) + " label names");
  MetricsReport report;
  report.per_label = per_label_aucs(data, all_rows(data.n_examples), &label_names);
  for (const auto& l : report.per_label) report.defined_labels += l.auc ? 1 : 0;
  report.macro_auc = macro_auc(report.per_label);
  report.weighted_auc = weighted_auc(report.per_label);
  return report;
}

std::pair<double, double> bootstrap_ci(const EvalData& data, Aggregate aggregate, int n_resamples,
                                       double alpha, std::uint64_t seed) {
  if (n_resamples < 100) throw ConfigError("bootstrap: need at least 100 resamples");
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("bootstrap: alpha must be in (0,1)");

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n_resamples));
  std::vector<int> rows(static_cast<std::size_t>(data.n_examples));
  for (int r = 0; r < n_resamples; ++r) {
    Prng rng = Prng::derive(seed, Stream::Bootstrap, static_cast<std::uint64_t>(r));
    for (auto& row : rows)
      row = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(data.n_examples)));
    const auto per_label = per_label_aucs(data, rows, nullptr);
    bool any_defined = false;
    for (const auto& l : per_label) any_defined |= l.auc.has_value();
    if (!any_defined) continue;  // fully degenerate resample
    values.push_back(aggregate == Aggregate::Macro ? macro_auc(per_label)
                                                   : weighted_auc(per_label));
  }
  if (values.empty()) throw Error("bootstrap: every resample was degenerate");
  std::sort(values.begin(), values.end());
  return {percentile(values, alpha / 2.0), percentile(values, 1.0 - alpha / 2.0)};
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("metrics: cannot write " + path);
  const bool ci = report.macro_ci.has_value();
  out << "label,auc,positives" << (ci ? ",ci_lo,ci_hi" : "") << "\n";
  for (const auto& l : report.per_label) {
    out << l.name << "," << (l.auc ? fmt(*l.auc) : "NA") << "," << l.positives;
    if (ci) out << ",,";
    out << "\n";
  }
  int total_pos = 0;
  for (const auto& l : report.per_label)
    if (l.auc) total_pos += l.positives;
  out << "MACRO," << fmt(report.macro_auc) << "," << total_pos;
  if (ci) out << "," << fmt(report.macro_ci->first) << "," << fmt(report.macro_ci->second);
  out << "\n";
  out << "WEIGHTED," << fmt(report.weighted_auc) << "," << total_pos;
  if (ci) {
    if (report.weighted_ci)
      out << "," << fmt(report.weighted_ci->first) << "," << fmt(report.weighted_ci->second);
    else
      out << ",,";
  }
  out << "\n";
}

}  // namespace spf
