#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spf/tensor.hpp"

// Synthetic location-sensitive benchmark: grayscale canvases with 1-2
// shapes, each centered (with jitter) in one quadrant. Labels are the
// cross product shape x quadrant, so a classifier must bind what it sees
// to where it sees it.

namespace spf {

enum class ShapeKind { Square = 0, Disc = 1, Cross = 2, Triangle = 3 };
enum class Quadrant { UL = 0, UR = 1, LL = 2, LR = 3 };

extern const char* const kShapeNames[4];
extern const char* const kQuadrantNames[4];

struct SynthConfig {
  int canvas_h = 64;
  int canvas_w = 64;
  int num_shapes = 4;        // prefix of {square, disc, cross, triangle}
  int n_images = 0;
  int shapes_per_image = 2;  // each image carries 1..shapes_per_image shapes
  double noise_sigma = 0.1;
  int jitter = 8;            // max offset from the quadrant center, pixels
  std::uint64_t seed = 0;

  void validate() const;
  int num_labels() const { return num_shapes * 4; }
  std::vector<std::string> label_names() const;  // "<shape>@<quadrant>", shape-major
};

struct PlacedShape {
  ShapeKind shape;
  Quadrant quadrant;
  int dy = 0;  // jitter offsets from the quadrant center
  int dx = 0;
};

struct ManifestRow {
  std::string path;                  // relative to the manifest directory
  std::vector<std::uint8_t> targets; // 0/1, one per label
};

struct Manifest {
  std::string dir;
  std::vector<std::string> label_names;
  std::vector<ManifestRow> rows;
  int canvas_h = 0;
  int canvas_w = 0;

  int num_labels() const { return static_cast<int>(label_names.size()); }
  std::size_t size() const { return rows.size(); }
};

struct Example {
  TensorF image;    // [1,H,W], values in [0,1]
  TensorF targets;  // [L] multi-hot
};

// Deterministic plan for image `index`: which shapes go where. The plan
// draws come first on the per-image stream, then the noise draws, so the
// plan can be replayed without re-rendering.
std::vector<PlacedShape> synth_image_plan(const SynthConfig& cfg, std::int64_t index);

// Binary mask of one placed shape on an otherwise empty canvas.
std::vector<std::uint8_t> render_shape_mask(const SynthConfig& cfg, const PlacedShape& placed);

// Final 8-bit pixels for image `index` (shapes + noise, quantized).
std::vector<std::uint8_t> render_synth_image(const SynthConfig& cfg, std::int64_t index);

// Writes n_images PNGs plus manifest.csv and labels.txt into out_dir.
Manifest generate_synthetic(const SynthConfig& cfg, const std::string& out_dir);

// Reads manifest.csv + labels.txt and validates every referenced image.
Manifest load_manifest(const std::string& dir);

Example load_example(const Manifest& m, std::size_t row);

struct Splits {
  std::vector<int> train, val, test;
};

// Deterministic 70-10-20 style split: val and test take the floors of
// their ratios, the remainder goes to train.
Splits split_dataset(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed);

// Per-epoch shuffled batches over a split; the final short batch is kept.
std::vector<std::vector<int>> iterate_batches(const std::vector<int>& split, int batch_size,
                                              int epoch, std::uint64_t seed);

}  // namespace spf
