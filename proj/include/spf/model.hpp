#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spf/config.hpp"
#include "spf/gradcheck.hpp"

// Backbone + flatten strategy + dense sigmoid head. Templated on the
// scalar type so the exact same composition runs in float for training and
// in double for gradient checks.

namespace spf {

template <typename T>
struct Model {
  ModelConfig cfg;
  ParamSet<T> params;
  BackboneLayout backbone;
  std::vector<AutoencoderLayout> autoencoders;  // one if shared, else per channel
  DenseRef head;
  int map_channels = 0, map_h = 0, map_w = 0;
};

template <typename T>
Model<T> build_model(const ModelConfig& cfg) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  Prng init = Prng::derive(cfg.seed, Stream::Init);
  m.backbone = build_backbone(cfg.backbone, m.params, init);
  const auto out = cfg.backbone.output_shape();
  m.map_channels = out[0];
  m.map_h = out[1];
  m.map_w = out[2];
  if (cfg.flatten == FlattenStrategy::Spf) {
    const int count = cfg.spf.shared_weights ? 1 : m.map_channels;
    for (int i = 0; i < count; ++i) {
      const std::string prefix = cfg.spf.shared_weights ? "ae" : "ae" + std::to_string(i);
      m.autoencoders.push_back(build_autoencoder(cfg.spf, m.map_h, m.map_w, prefix, m.params, init));
    }
  }
  const auto width = static_cast<int>(flattened_length(m.map_channels, cfg.spf));
  m.head = add_dense(m.params, "head", cfg.num_labels, width, init);
  return m;
}

template <typename T>
struct ForwardOut {
  Var<T> logits;
  std::optional<Var<T>> recon;  // absent (treated as zero) under the baseline strategy
};

// Returns logits over the flattened vector plus the reconstruction loss
// (zero and absent under the baseline strategy).
template <typename T>
ForwardOut<T> model_forward(Tape<T>& tape, const Tensor<T>& image, const Model<T>& model,
                            const BoundParams<T>& bp, Mode mode, Prng& dropout_rng) {
  Var<T> img = tape.leaf(image);
  Var<T> feature_maps =
      backbone_forward(img, model.cfg.backbone, model.backbone, bp, mode, dropout_rng);
  std::vector<Var<T>> maps = predict_maps(feature_maps);

  ForwardOut<T> out;
  Var<T> flat;
  if (model.cfg.flatten == FlattenStrategy::Spf) {
    flat = spf_flatten(maps, model.autoencoders, bp, model.cfg.spf);
    out.recon = reconstruction_loss(maps, model.autoencoders, bp, model.cfg.spf);
  } else {
    flat = baseline_flatten(maps, model.cfg.spf.code_dim);
  }
  out.logits = dense(flat, bp[model.head.w], bp[model.head.b]);
  return out;
}

// bce + lambda * recon. A present recon stays on the tape even at lambda 0,
// so dead-path parameters come back with exact zero gradients.
template <typename T>
Var<T> total_loss(Var<T> logits, const Tensor<T>& targets, std::optional<Var<T>> recon,
                  double lambda) {
  Var<T> loss = bce_with_logits(logits, targets);
  if (recon) return add(loss, scale(*recon, lambda));
  return loss;
}

// Finite-difference check of the composite model: every parameter group
// against a double-precision shadow evaluation.
inline GradCheckReport model_grad_check(const ModelConfig& cfg, std::uint64_t data_seed) {
  Model<double> model = build_model<double>(cfg);
  Prng rng(data_seed);
  TensorD image({1, cfg.backbone.input_h, cfg.backbone.input_w});
  for (auto& v : image.data) v = rng.next_unit();
  TensorD targets({cfg.num_labels});
  for (auto& v : targets.data) v = rng.next_unit() < 0.5 ? 0.0 : 1.0;

  NamedInputs inputs;
  for (std::size_t i = 0; i < model.params.count(); ++i)
    inputs.emplace_back(model.params.names[i], model.params.tensors[i]);

  return grad_check(inputs, [&](Tape<double>& tape, const std::vector<Var<double>>& leaves) {
    BoundParams<double> bp;
    bp.vars = leaves;
    Prng drop = Prng::derive(cfg.seed, Stream::Dropout, 0);
    auto fwd = model_forward(tape, image, model, bp, Mode::Train, drop);
    return total_loss(fwd.logits, targets, fwd.recon, cfg.spf.recon_weight);
  });
}

}  // namespace spf
