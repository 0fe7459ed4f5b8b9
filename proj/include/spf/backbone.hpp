#pragma once

#include <string>
#include <vector>

#include "spf/ops.hpp"
#include "spf/params.hpp"

// Feature extractor: a cascade of dilated conv blocks with additive skip
// connections, maxpooling between stages, channel dropout after each block
// in training, and a multiresolution fusion of pooled views feeding the
// final stage.

namespace spf {

struct BackboneConfig {
  int input_h = 64;
  int input_w = 64;
  std::vector<int> stage_channels = {4, 8, 32};
  std::vector<int> dilation_rates = {1, 4, 4};
  int block_depth = 1;
  double dropout_p = 0.1;
  int pyramid_levels = 3;
  bool skip_connections = true;

  int stages() const { return static_cast<int>(stage_channels.size()); }

  void validate() const {
    if (stage_channels.empty() || stage_channels.size() != dilation_rates.size())
      throw ConfigError("backbone: stage_channels and dilation_rates must be non-empty and equal length");
    if (block_depth < 1) throw ConfigError("backbone: block_depth must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("backbone: dropout_p must be in [0,1)");
    if (pyramid_levels < 1) throw ConfigError("backbone: pyramid_levels must be >= 1");
    int h = input_h, w = input_w;
    for (int i = 0; i + 1 < stages(); ++i) {
      if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("backbone: input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                          " does not survive " + std::to_string(stages() - 1) + " maxpools");
      h /= 2;
      w /= 2;
    }
    const int down = 1 << (pyramid_levels - 1);
    if (h % down != 0 || w % down != 0)
      throw ConfigError("backbone: final-stage input " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by pyramid downscale " + std::to_string(down));
    if (pyramid_levels > 1 && h != w)
      throw ConfigError("backbone: pyramid pooling needs a square final-stage input, got " +
                        std::to_string(h) + "x" + std::to_string(w));
  }

  // Output shape [C, H, W]: a pure function of the config.
  std::vector<int> output_shape() const {
    validate();
    const int s = stages();
    return {stage_channels[static_cast<std::size_t>(s - 1)], input_h >> (s - 1), input_w >> (s - 1)};
  }
};

struct BlockLayout {
  std::vector<ConvRef> convs;
  ConvRef skip;       // 1x1 projection, used only when channels change
  bool has_skip_proj = false;
};

struct BackboneLayout {
  std::vector<BlockLayout> blocks;
  std::vector<ConvRef> pyramid_proj;  // one 1x1 projection per pyramid level
};

template <typename T>
BackboneLayout build_backbone(const BackboneConfig& cfg, ParamSet<T>& ps, Prng& rng) {
  cfg.validate();
  BackboneLayout layout;
  int c_in = 1;
  for (int i = 0; i < cfg.stages(); ++i) {
    const int c_out = cfg.stage_channels[static_cast<std::size_t>(i)];
    const std::string stage = "backbone.stage" + std::to_string(i);
    BlockLayout bl;
    int c = c_in;
    for (int d = 0; d < cfg.block_depth; ++d) {
      bl.convs.push_back(add_conv(ps, stage + ".conv" + std::to_string(d), c_out, c, 3, rng));
      c = c_out;
    }
    if (c_in != c_out) {
      bl.skip = add_conv(ps, stage + ".skip", c_out, c_in, 1, rng);
      bl.has_skip_proj = true;
    }
    layout.blocks.push_back(bl);
    c_in = c_out;
  }
  // Fusion sits in front of the final stage; its input channel count is the
  // previous stage's output (or 1 for a single-stage net).
  const int fuse_c = cfg.stages() > 1 ? cfg.stage_channels[static_cast<std::size_t>(cfg.stages() - 2)] : 1;
  for (int j = 0; j < cfg.pyramid_levels; ++j)
    layout.pyramid_proj.push_back(add_conv(ps, "backbone.pyramid.proj" + std::to_string(j), fuse_c, fuse_c, 1, rng));
  return layout;
}

// block_depth x (same-padded conv with the stage dilation + relu), plus an
// additive skip from the block input.
template <typename T>
Var<T> dilated_block(Var<T> x, const BlockLayout& bl, const BoundParams<T>& bp, int dilation,
                     bool use_skip = true) {
  Var<T> h = x;
  for (const ConvRef& c : bl.convs) h = relu(conv2d(h, bp[c.w], bp[c.b], 1, dilation, Pad::Same));
  if (!use_skip) return h;
  Var<T> skip = bl.has_skip_proj ? conv2d(x, bp[bl.skip.w], bp[bl.skip.b], 1, 1, Pad::Same) : x;
  return add(h, skip);
}

// Levels ordered fine to coarse; every coarser level must be an integer
// downscale of the finest. Each level is projected by a 1x1 conv, coarser
// levels are upsampled (nearest) to the finest resolution, and all are summed.
template <typename T>
Var<T> pyramid_fuse(const std::vector<Var<T>>& levels, const std::vector<ConvRef>& projs,
                    const BoundParams<T>& bp) {
  if (levels.empty() || levels.size() != projs.size())
    throw ConfigError("pyramid_fuse: need one projection per level");
  Tape<T>& tape = *levels[0].tape;
  const int h0 = tape.val(levels[0]).dim(1), w0 = tape.val(levels[0]).dim(2);
  Var<T> out;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const int lh = tape.val(levels[j]).dim(1), lw = tape.val(levels[j]).dim(2);
    if (h0 % lh != 0 || w0 % lw != 0 || h0 / lh != w0 / lw)
      throw ShapeError("pyramid_fuse: level " + std::to_string(j) + " shape " +
                       tape.val(levels[j]).shape_str() + " is not an integer downscale of " +
                       std::to_string(h0) + "x" + std::to_string(w0));
    Var<T> p = conv2d(levels[j], bp[projs[j].w], bp[projs[j].b], 1, 1, Pad::Same);
    const int f = h0 / lh;
    if (f > 1) p = upsample_nearest(p, f);
    out = (j == 0) ? p : add(out, p);
  }
  return out;
}

// Full extractor: stages with maxpool(2) between them, dropout after every
// block in train mode, and pyramid fusion of pooled views of the final
// stage's input. Returns the last-stage feature maps [C, H/2^(s-1), W/2^(s-1)].
template <typename T>
Var<T> backbone_forward(Var<T> image, const BackboneConfig& cfg, const BackboneLayout& layout,
                        const BoundParams<T>& bp, Mode mode, Prng& dropout_rng) {
  Tape<T>& tape = *image.tape;
  const Tensor<T>& iv = tape.val(image);
  if (iv.rank() != 3 || iv.dim(0) != 1 || iv.dim(1) != cfg.input_h || iv.dim(2) != cfg.input_w)
    throw ShapeError("backbone: image " + iv.shape_str() + " does not match configured input [1," +
                     std::to_string(cfg.input_h) + "," + std::to_string(cfg.input_w) + "]");

  Var<T> x = image;
  const int s = cfg.stages();
  for (int i = 0; i < s; ++i) {
    if (i == s - 1 && cfg.pyramid_levels >= 1) {
      const int side = tape.val(x).dim(1);
      std::vector<Var<T>> levels;
      levels.push_back(x);
      for (int j = 1; j < cfg.pyramid_levels; ++j)
        levels.push_back(avgpool_to_grid(x, side >> j));
      x = pyramid_fuse(levels, layout.pyramid_proj, bp);
    }
    x = dilated_block(x, layout.blocks[static_cast<std::size_t>(i)], bp,
                      cfg.dilation_rates[static_cast<std::size_t>(i)], cfg.skip_connections);
    if (mode == Mode::Train && cfg.dropout_p > 0.0)
      x = spatial_dropout(x, cfg.dropout_p, mode, dropout_rng);
    if (i < s - 1) x = maxpool2d(x, 2, 2);
  }
  return x;
}

}  // namespace spf
