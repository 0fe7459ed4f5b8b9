#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spf/ops.hpp"
#include "spf/params.hpp"

// Spatially-preserving flattening: each feature map is squeezed through a
// bottleneck autoencoder and the per-map codes are concatenated in fixed
// (ascending channel) order. The conventional baseline pools each map onto
// a square grid of the same total length, so an ablation compares equal
// classifier widths.

namespace spf {

struct SpfConfig {
  int code_dim = 16;
  bool shared_weights = true;   // one autoencoder reused across channels
  double recon_weight = 1.0;    // weight of the reconstruction term in the total loss
  int encoder_depth = 0;        // stride-2 conv count; 0 derives log2(side)-2

  void validate() const {
    if (code_dim < 1) throw ConfigError("spf: code_dim must be >= 1");
    if (recon_weight < 0.0) throw ConfigError("spf: recon_weight must be >= 0");
    if (encoder_depth < 0) throw ConfigError("spf: encoder_depth must be >= 0");
  }
};

inline std::int64_t flattened_length(int channels, const SpfConfig& cfg) {
  return static_cast<std::int64_t>(channels) * cfg.code_dim;
}

// Encoder: depth x (stride-2 conv + relu), then a dense layer to the code.
// Decoder mirrors it with nearest-neighbor upsampling; the last conv is
// linear and emits one channel.
struct AutoencoderLayout {
  int map_h = 0, map_w = 0;
  int code_dim = 0;
  int depth = 0;
  std::vector<int> channels;      // encoder conv output channels, finest first
  std::vector<ConvRef> enc_convs;
  DenseRef enc_fc;
  DenseRef dec_fc;
  std::vector<ConvRef> dec_convs;  // coarse-to-fine; last maps to 1 channel
};

namespace detail {

inline bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline int derive_depth(int h, int w) {
  const int side = h < w ? h : w;
  int d = 0;
  while ((side >> d) > 4) ++d;
  return d > 0 ? d : 1;
}

}  // namespace detail

template <typename T>
AutoencoderLayout build_autoencoder(const SpfConfig& cfg, int map_h, int map_w,
                                    const std::string& prefix, ParamSet<T>& ps, Prng& rng) {
  cfg.validate();
  if (!detail::power_of_two(map_h) || !detail::power_of_two(map_w))
    throw ConfigError("autoencoder: map sides must be powers of two, got " + std::to_string(map_h) +
                      "x" + std::to_string(map_w));
  AutoencoderLayout l;
  l.map_h = map_h;
  l.map_w = map_w;
  l.code_dim = cfg.code_dim;
  l.depth = cfg.encoder_depth > 0 ? cfg.encoder_depth : detail::derive_depth(map_h, map_w);
  if ((map_h >> l.depth) < 1 || (map_w >> l.depth) < 1 || map_h % (1 << l.depth) != 0 ||
      map_w % (1 << l.depth) != 0)
    throw ConfigError("autoencoder: map " + std::to_string(map_h) + "x" + std::to_string(map_w) +
                      " incompatible with encoder depth " + std::to_string(l.depth));

  int c_in = 1;
  for (int j = 0; j < l.depth; ++j) {
    const int c_out = std::min(4 << j, 64);
    l.channels.push_back(c_out);
    l.enc_convs.push_back(add_conv(ps, prefix + ".enc.conv" + std::to_string(j), c_out, c_in, 3, rng));
    c_in = c_out;
  }
  const int bh = map_h >> l.depth, bw = map_w >> l.depth;
  const int bottleneck = l.channels.back() * bh * bw;
  l.enc_fc = add_dense(ps, prefix + ".enc.fc", cfg.code_dim, bottleneck, rng);
  l.dec_fc = add_dense(ps, prefix + ".dec.fc", bottleneck, cfg.code_dim, rng);
  for (int j = l.depth - 1; j >= 0; --j) {
    const int c_out = j > 0 ? l.channels[static_cast<std::size_t>(j - 1)] : 1;
    l.dec_convs.push_back(add_conv(ps, prefix + ".dec.conv" + std::to_string(l.depth - 1 - j), c_out,
                                   l.channels[static_cast<std::size_t>(j)], 3, rng));
  }
  return l;
}

// Splits a [C,H,W] tensor into C single-channel maps in ascending channel
// order. Pure reshaping, no parameters.
template <typename T>
std::vector<Var<T>> predict_maps(Var<T> maps) {
  detail::check_3d(maps.tape->val(maps), "predict_maps");
  const int c = maps.tape->val(maps).dim(0);
  std::vector<Var<T>> out;
  out.reserve(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) out.push_back(slice_channel(maps, i));
  return out;
}

template <typename T>
Var<T> encode_map(Var<T> map, const AutoencoderLayout& l, const BoundParams<T>& bp) {
  const Tensor<T>& mv = map.tape->val(map);
  if (mv.rank() != 3 || mv.dim(0) != 1 || mv.dim(1) != l.map_h || mv.dim(2) != l.map_w)
    throw ShapeError("encode_map: map " + mv.shape_str() + " does not match autoencoder input [1," +
                     std::to_string(l.map_h) + "," + std::to_string(l.map_w) + "]");
  Var<T> x = map;
  for (const ConvRef& c : l.enc_convs) x = relu(conv2d(x, bp[c.w], bp[c.b], 2, 1, Pad::Same));
  const int bh = l.map_h >> l.depth, bw = l.map_w >> l.depth;
  x = reshape(x, {l.channels.back() * bh * bw});
  return dense(x, bp[l.enc_fc.w], bp[l.enc_fc.b]);
}

template <typename T>
Var<T> decode_map(Var<T> code, const AutoencoderLayout& l, const BoundParams<T>& bp,
                  int target_h, int target_w) {
  if (target_h != l.map_h || target_w != l.map_w)
    throw ShapeError("decode_map: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                     " does not match autoencoder input " + std::to_string(l.map_h) + "x" +
                     std::to_string(l.map_w));
  const Tensor<T>& cv = code.tape->val(code);
  if (cv.rank() != 1 || cv.dim(0) != l.code_dim)
    throw ShapeError("decode_map: code " + cv.shape_str() + " does not match code_dim " +
                     std::to_string(l.code_dim));
  const int bh = l.map_h >> l.depth, bw = l.map_w >> l.depth;
  Var<T> x = relu(dense(code, bp[l.dec_fc.w], bp[l.dec_fc.b]));
  x = reshape(x, {l.channels.back(), bh, bw});
  for (std::size_t j = 0; j < l.dec_convs.size(); ++j) {
    x = upsample_nearest(x, 2);
    x = conv2d(x, bp[l.dec_convs[j].w], bp[l.dec_convs[j].b], 1, 1, Pad::Same);
    if (j + 1 < l.dec_convs.size()) x = relu(x);
  }
  return x;
}

namespace detail {

inline const AutoencoderLayout& layout_for(const std::vector<AutoencoderLayout>& layouts,
                                           std::size_t channel, bool shared) {
  return shared ? layouts[0] : layouts[channel];
}

template <typename T>
void check_same_map_shapes(const std::vector<Var<T>>& maps, const char* op) {
  if (maps.empty()) throw ShapeError(std::string(op) + ": no maps");
  const Tensor<T>& m0 = maps[0].tape->val(maps[0]);
  for (const auto& m : maps)
    if (!maps[0].tape->val(m).same_shape(m0))
      throw ShapeError(std::string(op) + ": inconsistent map shapes");
}

}  // namespace detail

// Codes concatenated in ascending channel order: out[i*d : (i+1)*d] is the
// code of maps[i].
template <typename T>
Var<T> spf_flatten(const std::vector<Var<T>>& maps, const std::vector<AutoencoderLayout>& layouts,
                   const BoundParams<T>& bp, const SpfConfig& cfg) {
  detail::check_same_map_shapes(maps, "spf_flatten");
  std::vector<Var<T>> codes;
  codes.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i)
    codes.push_back(encode_map(maps[i], detail::layout_for(layouts, i, cfg.shared_weights), bp));
  return concat1d(codes);
}

// Mean over channels of mse(map, decode(encode(map))).
template <typename T>
Var<T> reconstruction_loss(const std::vector<Var<T>>& maps,
                           const std::vector<AutoencoderLayout>& layouts, const BoundParams<T>& bp,
                           const SpfConfig& cfg) {
  detail::check_same_map_shapes(maps, "reconstruction_loss");
  std::vector<Var<T>> losses;
  losses.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const AutoencoderLayout& l = detail::layout_for(layouts, i, cfg.shared_weights);
    Var<T> code = encode_map(maps[i], l, bp);
    Var<T> recon = decode_map(code, l, bp, l.map_h, l.map_w);
    losses.push_back(mse(maps[i], recon));
  }
  return mean_scalars(losses);
}

// Conventional flatten of matched length: each map is average-pooled to a
// sqrt(d) x sqrt(d) grid, raveled row-major and concatenated in channel order.
template <typename T>
Var<T> baseline_flatten(const std::vector<Var<T>>& maps, int d) {
  detail::check_same_map_shapes(maps, "baseline_flatten");
  const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
  if (g * g != d)
    throw ShapeError("baseline_flatten: d = " + std::to_string(d) + " is not a perfect square");
  std::vector<Var<T>> parts;
  parts.reserve(maps.size());
  for (const auto& m : maps) parts.push_back(reshape(avgpool_to_grid(m, g), {d}));
  return concat1d(parts);
}

}  // namespace spf
