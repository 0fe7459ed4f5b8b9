#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spf/checkpoint.hpp"
#include "spf/data.hpp"
#include "spf/metrics.hpp"

namespace spf {

struct StepLosses {
  double bce = 0.0;
  double recon = 0.0;
  double total = 0.0;
};

// One forward+backward+Nadam update over the mean batch loss. Per-example
// gradients are computed on independent tapes (parallelizable) and reduced
// in index order, so results are bit-identical at any thread count.
StepLosses train_step(const std::vector<Example>& dataset, const std::vector<int>& batch,
                      Model<float>& model, NadamState<float>& opt);

struct EpochStats {
  int epoch = 0;
  double bce = 0.0;
  double recon = 0.0;
  double total = 0.0;
  double val_macro_auc = 0.0;
};

struct FitResult {
  Checkpoint checkpoint;  // parameters of the best validation epoch
  std::vector<EpochStats> history;
};

// Decodes every manifest row into memory, in manifest order.
std::vector<Example> load_all(const Manifest& m);

using EpochCallback = std::function<void(const EpochStats&)>;

FitResult fit(const std::vector<Example>& dataset, const Splits& splits, const ModelConfig& cfg,
              const EpochCallback& on_epoch = nullptr);

// Eval-mode sigmoid probabilities for one image.
TensorF predict_proba(const TensorF& image, const Model<float>& model);

// Eval-mode scores and targets over the given rows, one row per example.
EvalData collect_scores(const std::vector<Example>& dataset, const std::vector<int>& rows,
                        const Model<float>& model);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace spf
