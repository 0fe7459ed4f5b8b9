#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "spf/error.hpp"
#include "spf/metrics.hpp"
#include "spf/prng.hpp"

using namespace spf;

namespace {

// Independent oracle: O(P*N) pairwise concordance with half credit for ties.
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double concordant = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        concordant += 1.0;
      else if (scores[i] == scores[j])
        concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("worked example: AUC 0.75") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  auto auc = roc_auc(s, y);
  REQUIRE(auc.has_value());
  CHECK(*auc == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(*auc == doctest::Approx(brute_force_auc(s, y)).epsilon(1e-12));
}

TEST_CASE("perfect separation gives 1, all-equal scores give 0.5") {
  CHECK(*roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(*roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("single-class input yields the undefined signal") {
  CHECK(!roc_auc({0.1, 0.2}, {1, 1}).has_value());
  CHECK(!roc_auc({0.1, 0.2}, {0, 0}).has_value());
}

TEST_CASE("oracle equivalence on 200 randomized instances including heavy ties") {
  Prng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(199));
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    const bool tie_heavy = rng.next_unit() < 0.5;
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] =
          tie_heavy ? static_cast<double>(rng.next_below(5)) * 0.25 : rng.next_unit();
      y[static_cast<std::size_t>(i)] = rng.next_unit() < 0.5 ? 0 : 1;
      has_pos |= y[static_cast<std::size_t>(i)] == 1;
      has_neg |= y[static_cast<std::size_t>(i)] == 0;
    }
    if (!has_pos) y[0] = 1;
    if (!has_neg) y[static_cast<std::size_t>(n - 1)] = 0;
    auto auc = roc_auc(s, y);
    REQUIRE(auc.has_value());
    CHECK(std::abs(*auc - brute_force_auc(s, y)) < 1e-12);
  }
}

TEST_CASE("monotone transforms leave AUC exactly unchanged") {
  Prng rng(7);
  std::vector<double> s(60);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    s[i] = rng.next_unit() + 0.01;  // positive, for the cube transform
    y[i] = rng.next_unit() < 0.4 ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
  const double base = *roc_auc(s, y);

  std::vector<double> affine = s, cubed = s;
  for (auto& v : affine) v = 2.0 * v + 1.0;
  for (auto& v : cubed) v = v * v * v;
  CHECK(*roc_auc(affine, y) == base);
  CHECK(*roc_auc(cubed, y) == base);
}

TEST_CASE("negating scores maps AUC to 1 - AUC exactly") {
  Prng rng(8);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    s[i] = rng.next_unit();
    y[i] = rng.next_unit() < 0.5 ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
  std::vector<double> neg = s;
  for (auto& v : neg) v = -v;
  CHECK(*roc_auc(neg, y) == 1.0 - *roc_auc(s, y));
}

TEST_CASE("macro and weighted aggregation arithmetic") {
  std::vector<LabelAuc> two = {{"a", 0.9, 10}, {"b", 0.7, 30}};
  CHECK(macro_auc(two) == doctest::Approx(0.8));
  CHECK(weighted_auc(two) == doctest::Approx(0.75));

  std::vector<LabelAuc> one = {{"a", 0.83, 5}};
  CHECK(macro_auc(one) == doctest::Approx(0.83));
  CHECK(weighted_auc(one) == doctest::Approx(0.83));

  std::vector<LabelAuc> equal_weights = {{"a", 0.9, 10}, {"b", 0.7, 10}};
  CHECK(weighted_auc(equal_weights) == doctest::Approx(macro_auc(equal_weights)));

  std::vector<LabelAuc> undefined = {{"a", std::nullopt, 0}};
  CHECK_THROWS_AS(macro_auc(undefined), Error);
  CHECK_THROWS_AS(weighted_auc(undefined), Error);
}

TEST_CASE("undefined labels are excluded and flagged in the report") {
  EvalData d;
  d.n_examples = 4;
  d.n_labels = 2;
  d.scores = {0.9, 0.1, 0.8, 0.3, 0.2, 0.6, 0.1, 0.9};
  d.labels = {1, 0, 1, 0, 0, 0, 0, 0};  // second label has no positives
  auto report = compute_metrics(d, {"a", "b"});
  CHECK(report.defined_labels == 1);
  CHECK(report.per_label[0].auc.has_value());
  CHECK(!report.per_label[1].auc.has_value());
  CHECK(report.macro_auc == doctest::Approx(*report.per_label[0].auc));
}

TEST_CASE("degenerate bootstrap data gives a zero-width interval") {
  EvalData d;
  d.n_examples = 50;
  d.n_labels = 1;
  for (int i = 0; i < 50; ++i) {
    const int y = i < 25 ? 1 : 0;
    d.scores.push_back(y ? 1.0 : 0.0);
    d.labels.push_back(static_cast<std::uint8_t>(y));
  }
  auto ci = bootstrap_ci(d, Aggregate::Macro, 200, 0.05, 12);
  CHECK(ci.first == ci.second);
  CHECK(ci.first == doctest::Approx(1.0));
}

TEST_CASE("bootstrap intervals are deterministic given the seed") {
  Prng rng(15);
  EvalData d;
  d.n_examples = 60;
  d.n_labels = 2;
  for (int i = 0; i < 120; ++i) {
    d.scores.push_back(rng.next_unit());
    d.labels.push_back(static_cast<std::uint8_t>(rng.next_unit() < 0.5 ? 1 : 0));
  }
  auto a = bootstrap_ci(d, Aggregate::Weighted, 300, 0.05, 77);
  auto b = bootstrap_ci(d, Aggregate::Weighted, 300, 0.05, 77);
  CHECK(a == b);
  auto c = bootstrap_ci(d, Aggregate::Weighted, 300, 0.05, 78);
  CHECK(a != c);
}

TEST_CASE("the interval contains the point estimate on 50 randomized trials") {
  Prng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    EvalData d;
    d.n_examples = 80;
    d.n_labels = 3;
    for (int i = 0; i < d.n_examples; ++i) {
      for (int l = 0; l < 3; ++l) {
        const int y = rng.next_unit() < 0.5 ? 1 : 0;
        d.scores.push_back(rng.next_unit() + 0.3 * y);
        d.labels.push_back(static_cast<std::uint8_t>(y));
      }
    }
    auto report = compute_metrics(d, {"a", "b", "c"});
    auto ci = bootstrap_ci(d, Aggregate::Macro, 300, 0.05, static_cast<std::uint64_t>(trial));
    CAPTURE(trial);
    CHECK(ci.first <= report.macro_auc);
    CHECK(report.macro_auc <= ci.second);
  }
}

TEST_CASE("metrics CSV has one row per label plus MACRO and WEIGHTED") {
  EvalData d;
  d.n_examples = 6;
  d.n_labels = 2;
  Prng rng(17);
  for (int i = 0; i < 12; ++i) {
    d.scores.push_back(rng.next_unit());
    d.labels.push_back(static_cast<std::uint8_t>((i / 2) % 2));  // both classes per column
  }
  auto report = compute_metrics(d, {"a", "b"});
  const std::string path = "/tmp/spf_metrics_test.csv";
  write_metrics_csv(path, report);

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);  // header + 2 labels + MACRO + WEIGHTED
  CHECK(lines[0] == "label,auc,positives");
  CHECK(lines[3].substr(0, 6) == "MACRO,");
  CHECK(lines[4].substr(0, 9) == "WEIGHTED,");
}
