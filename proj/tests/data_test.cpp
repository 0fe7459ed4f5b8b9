#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "spf/data.hpp"
#include "spf/error.hpp"
#include "spf/png_io.hpp"

using namespace spf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("spf_data_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

SynthConfig small_cfg(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_images = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("generator produces 16 labels and one row per image") {
  TempDir dir("gen16");
  auto m = generate_synthetic(small_cfg(20, 7), dir.str());
  CHECK(m.label_names.size() == 16);
  CHECK(m.rows.size() == 20);
  CHECK(m.label_names[0] == "square@UL");
  CHECK(m.label_names[15] == "triangle@LR");
  for (const auto& row : m.rows) {
    int ones = 0;
    for (auto t : row.targets) ones += t;
    CHECK(ones >= 1);
    CHECK(ones <= 2);
  }
}

TEST_CASE("same seed twice gives byte-identical files") {
  TempDir a("det_a"), b("det_b");
  generate_synthetic(small_cfg(12, 99), a.str());
  generate_synthetic(small_cfg(12, 99), b.str());
  for (const auto& entry : fs::directory_iterator(a.path)) {
    const auto other = b.path / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(file_bytes(entry.path()) == file_bytes(other));
  }
}

TEST_CASE("generate then load preserves every multi-hot row") {
  TempDir dir("roundtrip");
  auto gen = generate_synthetic(small_cfg(15, 3), dir.str());
  auto loaded = load_manifest(dir.str());
  REQUIRE(loaded.rows.size() == gen.rows.size());
  CHECK(loaded.label_names == gen.label_names);
  CHECK(loaded.canvas_h == 64);
  for (std::size_t i = 0; i < gen.rows.size(); ++i) {
    CHECK(loaded.rows[i].path == gen.rows[i].path);
    CHECK(loaded.rows[i].targets == gen.rows[i].targets);
  }
}

TEST_CASE("non-binary label cells are rejected with the offending row named") {
  TempDir dir("badcell");
  generate_synthetic(small_cfg(3, 5), dir.str());
  // Corrupt one cell in row 2 of the manifest.
  std::ifstream in(dir.path / "manifest.csv");
  std::string all, line;
  int n = 0;
  while (std::getline(in, line)) {
    if (n == 2) {
      const auto pos = line.rfind(",");
      line = line.substr(0, pos + 1) + "2";
    }
    all += line + "\n";
    ++n;
  }
  in.close();
  std::ofstream(dir.path / "manifest.csv") << all;

  try {
    load_manifest(dir.str());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    CHECK(std::string(e.what()).find("not binary") != std::string::npos);
  }
}

TEST_CASE("missing image file is rejected") {
  TempDir dir("missing");
  generate_synthetic(small_cfg(3, 5), dir.str());
  fs::remove(dir.path / "img_000001.png");
  CHECK_THROWS_AS(load_manifest(dir.str()), IoError);
}

TEST_CASE("an all-white PNG loads as a tensor of ones") {
  TempDir dir("white");
  std::vector<std::uint8_t> white(64 * 64, 255);
  write_gray_png((dir.path / "img.png").string(), 64, 64, white);

  std::ofstream(dir.path / "labels.txt") << "a\n";
  std::ofstream(dir.path / "manifest.csv") << "path,a\nimg.png,1\n";
  auto m = load_manifest(dir.str());
  auto ex = load_example(m, 0);
  REQUIRE(ex.image.shape == std::vector<int>{1, 64, 64});
  for (std::int64_t i = 0; i < ex.image.numel(); ++i) CHECK(ex.image[i] == 1.0f);
  CHECK(ex.targets[0] == 1.0f);
}

TEST_CASE("split sizes follow the 70-10-20 floor rule") {
  auto s10 = split_dataset(10, {0.7, 0.1, 0.2}, 1);
  CHECK(s10.train.size() == 7);
  CHECK(s10.val.size() == 1);
  CHECK(s10.test.size() == 2);

  auto s3000 = split_dataset(3000, {0.7, 0.1, 0.2}, 1);
  CHECK(s3000.train.size() == 2100);
  CHECK(s3000.val.size() == 300);
  CHECK(s3000.test.size() == 600);

  CHECK_THROWS_AS(split_dataset(0, {0.7, 0.1, 0.2}, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(10, {0.5, 0.1, 0.2}, 1), ConfigError);
}

TEST_CASE("splits partition the index set for any N >= 3") {
  for (std::size_t n : {3u, 10u, 37u, 100u, 999u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto s = split_dataset(n, {0.7, 0.1, 0.2}, seed);
      std::set<int> seen;
      for (auto v : s.train) seen.insert(v);
      for (auto v : s.val) seen.insert(v);
      for (auto v : s.test) seen.insert(v);
      CHECK(seen.size() == n);  // disjoint and exhaustive
      CHECK(*seen.begin() == 0);
      CHECK(*seen.rbegin() == static_cast<int>(n) - 1);
      auto again = split_dataset(n, {0.7, 0.1, 0.2}, seed);
      CHECK(again.train == s.train);
    }
  }
}

TEST_CASE("batch iteration is deterministic and epochs permute differently") {
  std::vector<int> split(50);
  for (int i = 0; i < 50; ++i) split[static_cast<std::size_t>(i)] = i;

  auto b1 = iterate_batches(split, 16, 0, 42);
  auto b2 = iterate_batches(split, 16, 0, 42);
  CHECK(b1 == b2);
  CHECK(b1.size() == 4);           // 16+16+16+2
  CHECK(b1.back().size() == 2);    // final short batch kept

  auto all = iterate_batches(split, 50, 3, 42);
  CHECK(all.size() == 1);
  CHECK(all[0].size() == 50);

  std::set<std::vector<int>> orders;
  for (int epoch = 0; epoch < 5; ++epoch) {
    auto b = iterate_batches(split, 50, epoch, 42);
    orders.insert(b[0]);
  }
  CHECK(orders.size() == 5);  // all epoch permutations distinct
}

TEST_CASE("label balance: positives within 5x of each other at n=1600") {
  TempDir dir("balance");
  SynthConfig cfg = small_cfg(1600, 11);
  auto m = generate_synthetic(cfg, dir.str());
  std::vector<int> counts(16, 0);
  for (const auto& row : m.rows)
    for (std::size_t i = 0; i < row.targets.size(); ++i) counts[i] += row.targets[i];
  const int lo = *std::min_element(counts.begin(), counts.end());
  const int hi = *std::max_element(counts.begin(), counts.end());
  CHECK(lo > 0);
  CHECK(hi <= 5 * lo);
}

TEST_CASE("every positive label is visually grounded in the stored image") {
  TempDir dir("grounded");
  SynthConfig cfg = small_cfg(40, 23);
  generate_synthetic(cfg, dir.str());
  auto m = load_manifest(dir.str());
  for (std::int64_t i = 0; i < 40; ++i) {
    auto ex = load_example(m, static_cast<std::size_t>(i));
    for (const auto& placed : synth_image_plan(cfg, i)) {
      auto mask = render_shape_mask(cfg, placed);
      std::int64_t shape_px = 0, recovered = 0;
      for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        ++shape_px;
        if (ex.image[static_cast<std::int64_t>(p)] > 0.5f) ++recovered;
      }
      REQUIRE(shape_px > 0);
      CHECK(static_cast<double>(recovered) >= 0.9 * static_cast<double>(shape_px));
    }
  }
}

TEST_CASE("generator rejects bad configs and unwritable directories") {
  SynthConfig cfg = small_cfg(0, 1);
  TempDir dir("badcfg");
  CHECK_THROWS_AS(generate_synthetic(cfg, dir.str()), ConfigError);
  cfg.n_images = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg, "/proc/no_such_dir/x"), IoError);
}
