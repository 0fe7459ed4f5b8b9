#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spf/data.hpp"
#include "spf/error.hpp"
#include "spf/png_io.hpp"
#include "spf/prng.hpp"

namespace spf {

const char* const kShapeNames[4] = {"square", "disc", "cross", "triangle"};
const char* const kQuadrantNames[4] = {"UL", "UR", "LL", "LR"};

namespace {

// Sub-stream tags within Stream::Data.
constexpr std::uint64_t kGenImage = 1;

struct Geometry {
  int qh, qw;       // quadrant size
  int extent;       // shape side / diameter
  int jitter;       // effective jitter after clamping to the quadrant
};

Geometry geometry(const SynthConfig& cfg) {
  Geometry g;
  g.qh = cfg.canvas_h / 2;
  g.qw = cfg.canvas_w / 2;
  const int side = std::min(g.qh, g.qw);
  g.extent = std::max(4, side * 3 / 16);
  const int room = (side - g.extent) / 2 - 1;
  g.jitter = std::max(0, std::min(cfg.jitter, room));
  return g;
}

// Stroke rendering: the four kinds have similar ink coverage and coarse
// footprint, so telling them apart needs the fine edge arrangement rather
// than block-average intensity.
void draw_shape(std::vector<float>& canvas, const SynthConfig& cfg, const PlacedShape& p) {
  const Geometry g = geometry(cfg);
  const int qy = (static_cast<int>(p.quadrant) / 2) * g.qh;
  const int qx = (static_cast<int>(p.quadrant) % 2) * g.qw;
  const int cy = qy + g.qh / 2 + p.dy;
  const int cx = qx + g.qw / 2 + p.dx;
  const int s = g.extent;
  const int half = s / 2;
  const int stroke = std::max(1, s / 7);

  auto put = [&](int y, int x) {
    if (y >= 0 && y < cfg.canvas_h && x >= 0 && x < cfg.canvas_w)
      canvas[static_cast<std::size_t>(y) * cfg.canvas_w + x] = 1.0f;
  };

  switch (p.shape) {
    case ShapeKind::Square:
      for (int y = cy - half; y < cy - half + s; ++y)
        for (int x = cx - half; x < cx - half + s; ++x) {
          const int dy = std::min(y - (cy - half), cy - half + s - 1 - y);
          const int dx = std::min(x - (cx - half), cx - half + s - 1 - x);
          if (std::min(dy, dx) < stroke) put(y, x);
        }
      break;
    case ShapeKind::Disc:
      for (int y = cy - half; y <= cy + half; ++y)
        for (int x = cx - half; x <= cx + half; ++x) {
          const int d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          const int r_in = half - stroke;
          if (d2 <= half * half && d2 > r_in * r_in) put(y, x);
        }
      break;
    case ShapeKind::Cross: {
      const int bhalf = stroke / 2;
      const int bar = stroke;
      for (int y = cy - half; y < cy - half + s; ++y)
        for (int x = cx - bhalf; x < cx - bhalf + bar; ++x) put(y, x);
      for (int y = cy - bhalf; y < cy - bhalf + bar; ++y)
        for (int x = cx - half; x < cx - half + s; ++x) put(y, x);
      break;
    }
    case ShapeKind::Triangle:
      for (int t = 0; t < s; ++t) {
        const int y = cy - half + t;
        const int hw = s > 1 ? (t * half) / (s - 1) : 0;
        if (t >= s - stroke) {  // base
          for (int x = cx - hw; x <= cx + hw; ++x) put(y, x);
        } else {  // slanted edges
          for (int x = cx - hw; x <= cx + hw; ++x)
            if (std::abs(std::abs(x - cx) - hw) < stroke) put(y, x);
        }
      }
      break;
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (canvas_h < 8 || canvas_w < 8 || canvas_h % 2 != 0 || canvas_w % 2 != 0)
    throw ConfigError("synth: canvas must be even and at least 8x8");
  if (num_shapes < 1 || num_shapes > 4)
    throw ConfigError("synth: num_shapes must be in 1..4");
  if (n_images < 1) throw ConfigError("synth: n_images must be >= 1");
  if (shapes_per_image < 1 || shapes_per_image > 2)
    throw ConfigError("synth: shapes_per_image must be 1 or 2");
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (jitter < 0) throw ConfigError("synth: jitter must be >= 0");
}

std::vector<std::string> SynthConfig::label_names() const {
  std::vector<std::string> names;
  for (int s = 0; s < num_shapes; ++s)
    for (int q = 0; q < 4; ++q)
      names.push_back(std::string(kShapeNames[s]) + "@" + kQuadrantNames[q]);
  return names;
}

namespace {

std::vector<PlacedShape> sample_plan(const SynthConfig& cfg, Prng& rng) {
  const Geometry g = geometry(cfg);
  const int count = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.shapes_per_image)));

  int quads[4] = {0, 1, 2, 3};
  for (int i = 3; i > 0; --i)
    std::swap(quads[i], quads[rng.next_below(static_cast<std::uint64_t>(i + 1))]);

  std::vector<PlacedShape> plan;
  for (int i = 0; i < count; ++i) {
    PlacedShape p;
    p.shape = static_cast<ShapeKind>(rng.next_below(static_cast<std::uint64_t>(cfg.num_shapes)));
    p.quadrant = static_cast<Quadrant>(quads[i]);
    p.dy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(2 * g.jitter + 1))) - g.jitter;
    p.dx = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(2 * g.jitter + 1))) - g.jitter;
    plan.push_back(p);
  }
  return plan;
}

}  // namespace

std::vector<PlacedShape> synth_image_plan(const SynthConfig& cfg, std::int64_t index) {
  Prng rng = Prng::derive(cfg.seed, Stream::Data, kGenImage, static_cast<std::uint64_t>(index));
  return sample_plan(cfg, rng);
}

std::vector<std::uint8_t> render_shape_mask(const SynthConfig& cfg, const PlacedShape& placed) {
  std::vector<float> canvas(static_cast<std::size_t>(cfg.canvas_h) * cfg.canvas_w, 0.0f);
  draw_shape(canvas, cfg, placed);
  std::vector<std::uint8_t> mask(canvas.size());
  for (std::size_t i = 0; i < canvas.size(); ++i) mask[i] = canvas[i] > 0.5f ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> render_synth_image(const SynthConfig& cfg, std::int64_t index) {
  // Noise draws follow the plan draws on the same per-image stream.
  Prng rng = Prng::derive(cfg.seed, Stream::Data, kGenImage, static_cast<std::uint64_t>(index));
  const std::vector<PlacedShape> plan = sample_plan(cfg, rng);
  std::vector<float> canvas(static_cast<std::size_t>(cfg.canvas_h) * cfg.canvas_w, 0.0f);
  for (const auto& p : plan) draw_shape(canvas, cfg, p);

  std::vector<std::uint8_t> pixels(canvas.size());
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    double v = canvas[i];
    if (cfg.noise_sigma > 0.0) v += rng.normal() * cfg.noise_sigma;
    v = std::clamp(v, 0.0, 1.0);
    pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return pixels;
}

Manifest generate_synthetic(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("synth: cannot create output directory " + out_dir);

  Manifest m;
  m.dir = out_dir;
  m.label_names = cfg.label_names();
  m.canvas_h = cfg.canvas_h;
  m.canvas_w = cfg.canvas_w;

  for (std::int64_t i = 0; i < cfg.n_images; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%06lld.png", static_cast<long long>(i));
    write_gray_png(out_dir + "/" + name, cfg.canvas_h, cfg.canvas_w, render_synth_image(cfg, i));

    ManifestRow row;
    row.path = name;
    row.targets.assign(static_cast<std::size_t>(cfg.num_labels()), 0);
    for (const auto& p : synth_image_plan(cfg, i))
      row.targets[static_cast<std::size_t>(p.shape) * 4 + static_cast<std::size_t>(p.quadrant)] = 1;
    m.rows.push_back(std::move(row));
  }

  std::ofstream labels(out_dir + "/labels.txt");
  if (!labels) throw IoError("synth: cannot write labels.txt in " + out_dir);
  for (const auto& n : m.label_names) labels << n << "\n";
  labels.close();

  std::ofstream csv(out_dir + "/manifest.csv");
  if (!csv) throw IoError("synth: cannot write manifest.csv in " + out_dir);
  csv << "path";
  for (const auto& n : m.label_names) csv << "," << n;
  csv << "\n";
  for (const auto& row : m.rows) {
    csv << row.path;
    for (std::uint8_t t : row.targets) csv << "," << static_cast<int>(t);
    csv << "\n";
  }
  csv.close();
  return m;
}

}  // namespace spf
