#include "spf/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace spf {

namespace {

struct ExampleResult {
  std::vector<TensorF> grads;
  double bce = 0.0, recon = 0.0, total = 0.0;
  std::string error;
};

void run_example(const Example& ex, const Model<float>& model, std::uint64_t step_nonce,
                 std::uint64_t example_tag, ExampleResult& out) {
  try {
    Tape<float> tape;
    BoundParams<float> bp = bind(tape, model.params);
    Prng drop = Prng::derive(model.cfg.seed, Stream::Dropout, step_nonce, example_tag);
    auto fwd = model_forward(tape, ex.image, model, bp, Mode::Train, drop);
    Var<float> bce = bce_with_logits(fwd.logits, ex.targets);
    Var<float> loss = fwd.recon ? add(bce, scale(*fwd.recon, model.cfg.spf.recon_weight)) : bce;
    out.bce = tape.val(bce)[0];
    out.recon = fwd.recon ? tape.val(*fwd.recon)[0] : 0.0;
    out.total = tape.val(loss)[0];
    auto grads = tape.backward(loss);
    out.grads.reserve(model.params.count());
    for (std::size_t p = 0; p < model.params.count(); ++p)
      out.grads.push_back(grads.at(bp[static_cast<int>(p)]));
  } catch (const std::exception& e) {
    out.error = e.what();
  }
}

}  // namespace

StepLosses train_step(const std::vector<Example>& dataset, const std::vector<int>& batch,
                      Model<float>& model, NadamState<float>& opt) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  const std::uint64_t nonce = static_cast<std::uint64_t>(opt.t);
  std::vector<ExampleResult> results(batch.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < batch.size(); ++i)
    run_example(dataset[static_cast<std::size_t>(batch[i])], model, nonce,
                static_cast<std::uint64_t>(i), results[i]);

  StepLosses losses;
  for (const auto& r : results) {
    if (!r.error.empty()) throw Error("train_step: " + r.error);
    losses.bce += r.bce;
    losses.recon += r.recon;
    losses.total += r.total;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  losses.bce *= inv;
  losses.recon *= inv;
  losses.total *= inv;
  if (!std::isfinite(losses.total))
    throw NumericError("train_step: non-finite loss " + std::to_string(losses.total) + " at step " +
                       std::to_string(opt.t + 1));

  // Fixed-order reduction: mean of per-example gradients.
  std::vector<TensorF> gsum;
  gsum.reserve(model.params.count());
  for (const auto& t : model.params.tensors) gsum.push_back(TensorF::zeros(t.shape));
  for (const auto& r : results)
    for (std::size_t p = 0; p < gsum.size(); ++p)
      for (std::int64_t j = 0; j < gsum[p].numel(); ++j) gsum[p][j] += r.grads[p][j];
  for (auto& g : gsum)
    for (auto& v : g.data) v = static_cast<float>(static_cast<double>(v) * inv);

  nadam_step(model.params.tensors, gsum, opt);
  return losses;
}

std::vector<Example> load_all(const Manifest& m) {
  std::vector<Example> out(m.size());
  std::vector<std::string> errors(m.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < m.size(); ++i) {
    try {
      out[i] = load_example(m, i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw IoError("load_all: " + e);
  return out;
}

TensorF predict_proba(const TensorF& image, const Model<float>& model) {
  Tape<float> tape;
  BoundParams<float> bp = bind(tape, model.params);
  Prng drop = Prng::derive(model.cfg.seed, Stream::Dropout);  // unused in eval mode
  auto fwd = model_forward(tape, image, model, bp, Mode::Eval, drop);
  TensorF probs = tape.val(fwd.logits);
  for (auto& v : probs.data) v = sigmoid_scalar(v);
  return probs;
}

EvalData collect_scores(const std::vector<Example>& dataset, const std::vector<int>& rows,
                        const Model<float>& model) {
  EvalData data;
  data.n_examples = static_cast<int>(rows.size());
  data.n_labels = model.cfg.num_labels;
  data.scores.resize(rows.size() * static_cast<std::size_t>(data.n_labels));
  data.labels.resize(rows.size() * static_cast<std::size_t>(data.n_labels));

  std::vector<std::string> errors(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < rows.size(); ++r) {
    try {
      const Example& ex = dataset[static_cast<std::size_t>(rows[r])];
      TensorF probs = predict_proba(ex.image, model);
      for (int l = 0; l < data.n_labels; ++l) {
        data.scores[r * static_cast<std::size_t>(data.n_labels) + static_cast<std::size_t>(l)] = probs[l];
        data.labels[r * static_cast<std::size_t>(data.n_labels) + static_cast<std::size_t>(l)] =
            ex.targets[l] != 0.0f ? 1 : 0;
      }
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error("collect_scores: " + e);
  return data;
}

namespace {

double val_macro_auc(const std::vector<Example>& dataset, const std::vector<int>& rows,
                     const Model<float>& model) {
  const EvalData data = collect_scores(dataset, rows, model);
  std::vector<double> s(rows.size());
  std::vector<int> y(rows.size());
  std::vector<LabelAuc> per_label;
  for (int col = 0; col < data.n_labels; ++col) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s[r] = data.score(static_cast<int>(r), col);
      y[r] = data.label(static_cast<int>(r), col);
    }
    LabelAuc l;
    l.auc = roc_auc(s, y);
    per_label.push_back(l);
  }
  return macro_auc(per_label);
}

}  // namespace

FitResult fit(const std::vector<Example>& dataset, const Splits& splits, const ModelConfig& cfg,
              const EpochCallback& on_epoch) {
  if (splits.train.empty() || splits.val.empty())
    throw ConfigError("fit: train and val splits must be non-empty");
  Model<float> model = build_model<float>(cfg);
  NadamState<float> opt;
  opt.hyper = cfg.optimizer;
  opt.init(model.params.tensors);

  FitResult result;
  ParamSet<float> best_params = model.params;
  double best_auc = -1.0;
  int best_epoch = -1;
  StepLosses last{};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = iterate_batches(splits.train, cfg.batch_size, epoch, cfg.seed);
    double bce = 0.0, recon = 0.0, total = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : batches) {
      last = train_step(dataset, batch, model, opt);
      bce += last.bce * static_cast<double>(batch.size());
      recon += last.recon * static_cast<double>(batch.size());
      total += last.total * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.bce = bce / static_cast<double>(seen);
    stats.recon = recon / static_cast<double>(seen);
    stats.total = total / static_cast<double>(seen);
    stats.val_macro_auc = val_macro_auc(dataset, splits.val, model);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (stats.val_macro_auc > best_auc) {
      best_auc = stats.val_macro_auc;
      best_epoch = epoch;
      best_params = model.params;
    }
  }

  Checkpoint ckpt;
  ckpt.cfg = cfg;
  ckpt.params = std::move(best_params);
  ckpt.meta.epochs_completed = cfg.epochs;
  ckpt.meta.best_epoch = best_epoch;
  if (!result.history.empty()) {
    ckpt.meta.final_bce = result.history.back().bce;
    ckpt.meta.final_recon = result.history.back().recon;
    ckpt.meta.final_total = result.history.back().total;
    ckpt.meta.best_val_macro_auc = best_auc;
  }
  // Optimizer state pairs with the stored parameters only when the best
  // epoch is the last one; otherwise it is omitted.
  if (cfg.epochs > 0 && best_epoch == cfg.epochs - 1) ckpt.opt = std::move(opt);
  result.checkpoint = std::move(ckpt);
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("history: cannot write " + path);
  out << "epoch,bce,recon,total,val_macro_auc\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", h.epoch, h.bce, h.recon, h.total,
                  h.val_macro_auc);
    out << buf;
  }
}

}  // namespace spf
