#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spf/data.hpp"
#include "spf/error.hpp"
#include "spf/png_io.hpp"
#include "spf/prng.hpp"

namespace spf {

namespace {

constexpr std::uint64_t kSplit = 2;
constexpr std::uint64_t kShuffle = 3;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

Manifest load_manifest(const std::string& dir) {
  Manifest m;
  m.dir = dir;

  std::ifstream labels(dir + "/labels.txt");
  if (!labels) throw IoError("manifest: missing labels.txt in " + dir);
  std::string line;
  while (std::getline(labels, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) m.label_names.push_back(line);
  }
  if (m.label_names.empty()) throw IoError("manifest: labels.txt in " + dir + " is empty");

  std::ifstream csv(dir + "/manifest.csv");
  if (!csv) throw IoError("manifest: missing manifest.csv in " + dir);
  if (!std::getline(csv, line)) throw IoError("manifest: manifest.csv in " + dir + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() != m.label_names.size() + 1 || header[0] != "path")
    throw IoError("manifest: header does not match labels.txt (" + std::to_string(header.size() - 1) +
                  " columns vs " + std::to_string(m.label_names.size()) + " labels)");
  for (std::size_t i = 0; i < m.label_names.size(); ++i)
    if (header[i + 1] != m.label_names[i])
      throw IoError("manifest: header label '" + header[i + 1] + "' does not match labels.txt '" +
                    m.label_names[i] + "'");

  int rowno = 1;
  while (std::getline(csv, line)) {
    ++rowno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != m.label_names.size() + 1)
      throw IoError("manifest: row " + std::to_string(rowno) + " has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(m.label_names.size() + 1));
    ManifestRow row;
    row.path = cells[0];
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i] == "0")
        row.targets.push_back(0);
      else if (cells[i] == "1")
        row.targets.push_back(1);
      else
        throw IoError("manifest: row " + std::to_string(rowno) + " label cell '" + cells[i] +
                      "' is not binary");
    }
    m.rows.push_back(std::move(row));
  }

  // Every referenced file must exist and decode to one canvas-sized
  // 8-bit grayscale image; the canvas is whatever the first image says.
  for (const auto& row : m.rows) {
    int h = 0, w = 0;
    probe_gray_png(dir + "/" + row.path, h, w);
    if (m.canvas_h == 0) {
      m.canvas_h = h;
      m.canvas_w = w;
    } else if (h != m.canvas_h || w != m.canvas_w) {
      throw IoError("manifest: " + row.path + " is " + std::to_string(w) + "x" + std::to_string(h) +
                    ", expected " + std::to_string(m.canvas_w) + "x" + std::to_string(m.canvas_h));
    }
  }
  return m;
}

Example load_example(const Manifest& m, std::size_t row) {
  const ManifestRow& r = m.rows.at(row);
  int h = 0, w = 0;
  const auto pixels = read_gray_png(m.dir + "/" + r.path, h, w);
  Example ex;
  ex.image = TensorF({1, h, w});
  for (std::size_t i = 0; i < pixels.size(); ++i)
    ex.image[static_cast<std::int64_t>(i)] = static_cast<float>(pixels[i]) / 255.0f;
  ex.targets = TensorF({static_cast<int>(r.targets.size())});
  for (std::size_t i = 0; i < r.targets.size(); ++i)
    ex.targets[static_cast<std::int64_t>(i)] = static_cast<float>(r.targets[i]);
  return ex;
}

Splits split_dataset(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  if (n == 0) throw ConfigError("split: empty manifest");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ConfigError("split: ratios must sum to 1");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Prng rng = Prng::derive(seed, Stream::Data, kSplit);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_below(static_cast<std::uint64_t>(i + 1))]);

  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;  // remainder goes to train

  Splits s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

std::vector<std::vector<int>> iterate_batches(const std::vector<int>& split, int batch_size,
                                              int epoch, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batches: batch_size must be >= 1");
  std::vector<int> order = split;
  Prng rng = Prng::derive(seed, Stream::Data, kShuffle, static_cast<std::uint64_t>(epoch));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(static_cast<std::uint64_t>(i))]);

  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace spf
