/* Copyright 2026 The ENOS Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ENOS_DATA_HPP
#define ENOS_DATA_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "enos/tensor.hpp"

namespace enos {

enum class Split { Train, Val, Test };

// Desk-scale classification dataset. Features are stored raw; normalization
// stats come from the train split only and are applied at batch assembly.
struct Dataset {
  Shape sample_shape;  // {C,H,W}
  int classes = 0;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  std::vector<double> mean, stddev;

  std::size_t feature_len() const { return numel(sample_shape); }
  const std::vector<std::size_t>& split(Split s) const {
    switch (s) {
      case Split::Train: return train_idx;
      case Split::Val: return val_idx;
      case Split::Test: return test_idx;
    }
    throw std::logic_error("bad split");
  }

  // 80/10/10 split over a seed-shuffled permutation, then train-split stats.
  void finalize_splits(std::uint64_t seed, double train_frac = 0.8, double val_frac = 0.1) {
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t ntr = static_cast<std::size_t>(train_frac * perm.size());
    std::size_t nval = static_cast<std::size_t>(val_frac * perm.size());
    train_idx.assign(perm.begin(), perm.begin() + ntr);
    val_idx.assign(perm.begin() + ntr, perm.begin() + ntr + nval);
    test_idx.assign(perm.begin() + ntr + nval, perm.end());
    compute_stats();
  }

  void compute_stats() {
    std::size_t f = feature_len();
    mean.assign(f, 0.0);
    stddev.assign(f, 0.0);
    if (train_idx.empty()) throw std::invalid_argument("dataset: empty train split");
    for (std::size_t i : train_idx)
      for (std::size_t j = 0; j < f; ++j) mean[j] += x[i][j];
    for (double& m : mean) m /= static_cast<double>(train_idx.size());
    for (std::size_t i : train_idx)
      for (std::size_t j = 0; j < f; ++j) {
        double d = x[i][j] - mean[j];
        stddev[j] += d * d;
      }
    for (double& s : stddev) {
      s = std::sqrt(s / static_cast<double>(train_idx.size()));
      if (s < 1e-12) s = 1.0;
    }
  }

  std::vector<double> normalized(std::size_t i) const {
    std::vector<double> v(x[i].size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = (x[i][j] - mean[j]) / stddev[j];
    return v;
  }
};

namespace detail {

struct SourceParams {
  std::string name;
  std::map<std::string, std::string> kv;
  long get_long(const std::string& key, long dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stol(it->second);
  }
  double get_double(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stod(it->second);
  }
};

inline SourceParams parse_source_params(const std::string& s) {
  SourceParams p;
  auto q = s.find('?');
  p.name = s.substr(0, q);
  if (q != std::string::npos) {
    for (const auto& tok : split(s.substr(q + 1), '&')) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("dataset option '" + tok + "' is not key=value");
      p.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return p;
}

inline Shape image_shape_for(std::size_t features) {
  auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(features))));
  if (static_cast<std::size_t>(side) * side == features) return {1, side, side};
  return {1, 1, static_cast<int>(features)};
}

}  // namespace detail

// Gaussian class clusters on a 16-dim feature grid (1x4x4).
inline Dataset make_blobs(int classes, int samples, double noise, std::uint64_t seed) {
  if (classes < 2 || samples < classes * 10)
    throw std::invalid_argument("blobs: need >= 2 classes and >= 10 samples per class");
  Dataset d;
  d.sample_shape = {1, 4, 4};
  d.classes = classes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> centers(classes, std::vector<double>(16));
  for (auto& c : centers)
    for (double& v : c) v = 2.0 * g(rng);
  for (int i = 0; i < samples; ++i) {
    int cls = i % classes;
    std::vector<double> v(16);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = centers[cls][j] + noise * g(rng);
    d.x.push_back(std::move(v));
    d.y.push_back(cls);
  }
  d.finalize_splits(seed + 1);
  return d;
}

// Concentric rings in 2-D, lifted into 16 dims by a fixed random rotation.
inline Dataset make_rings(int classes, int samples, double noise, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("rings: need >= 2 classes");
  Dataset d;
  d.sample_shape = {1, 4, 4};
  d.classes = classes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  std::vector<std::vector<double>> basis(2, std::vector<double>(16));
  for (auto& b : basis)
    for (double& v : b) v = g(rng);
  for (int i = 0; i < samples; ++i) {
    int cls = i % classes;
    double r = 1.0 + 1.5 * cls + noise * g(rng);
    double a = u(rng);
    double px = r * std::cos(a), py = r * std::sin(a);
    std::vector<double> v(16);
    for (std::size_t j = 0; j < v.size(); ++j)
      v[j] = px * basis[0][j] + py * basis[1][j] + 0.1 * noise * g(rng);
    d.x.push_back(std::move(v));
    d.y.push_back(cls);
  }
  d.finalize_splits(seed + 1);
  return d;
}

// 8x8 digit glyphs with per-sample jitter: ten fixed stroke templates plus
// random +-1 pixel shift and Gaussian noise.
inline Dataset make_digits(int samples, double noise, std::uint64_t seed) {
  static const char* glyphs[10] = {
      ".####..#..#..#..#..#..#..#..#..#..#..#..#..####.",  // 0
      "..##....##.....#.....#.....#.....#.....#...####.",  // 1
      ".####..#..#.....#....#....#....#....#....######.",  // 2
      ".####.....#....#...##......#.....#..#..#..####..",  // 3
      ".#..#..#..#..#..#..####.....#.....#.....#.....#.",  // 4
      "######.#.....#.....####......#.....#.#..#..###..",  // 5
      ".####..#.....#.....####..#..#..#..#..#..#..####.",  // 6
      "######....#....#....#....#....#...#....#...#....",  // 7
      ".####..#..#..#..#..####..#..#..#..#..#..#..####.",  // 8
      ".####..#..#..#..#..####......#.....#.....#.####.",  // 9
  };
  Dataset d;
  d.sample_shape = {1, 8, 8};
  d.classes = 10;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> shift(-1, 1);
  // Templates are 6x8 strokes centered in the 8x8 frame.
  for (int i = 0; i < samples; ++i) {
    int cls = i % 10;
    int dy = shift(rng), dx = shift(rng);
    std::vector<double> v(64, 0.0);
    const char* tpl = glyphs[cls];
    const std::size_t tlen = std::strlen(tpl);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 6; ++c) {
        int y = r + dy, x = 1 + c + dx;
        std::size_t t = static_cast<std::size_t>(r) * 6 + c;
        if (y >= 0 && y < 8 && x >= 0 && x < 8 && t < tlen && tpl[t] == '#')
          v[static_cast<std::size_t>(y) * 8 + x] = 1.0;
      }
    for (double& p : v) p += noise * g(rng);
    d.x.push_back(std::move(v));
    d.y.push_back(cls);
  }
  d.finalize_splits(seed + 1);
  return d;
}

// --- IDX (big-endian magic + dims) -------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& in, std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw std::invalid_argument("idx: truncated read at byte offset " + std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

// Classic IDX container: magic 0x00000803 for u8 image stacks, 0x00000801 for
// u8 label vectors.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::uint64_t seed) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::invalid_argument("cannot open idx images '" + images_path + "'");
  std::uint32_t magic = detail::read_be32(img, 0);
  if (magic != 0x00000803)
    throw std::invalid_argument("idx images: bad magic at byte offset 0 (got 0x" +
                                [&] { std::ostringstream o; o << std::hex << magic; return o.str(); }() +
                                ", want 0x803)");
  std::uint32_t n = detail::read_be32(img, 4);
  std::uint32_t rows = detail::read_be32(img, 8);
  std::uint32_t cols = detail::read_be32(img, 12);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::invalid_argument("cannot open idx labels '" + labels_path + "'");
  std::uint32_t lmagic = detail::read_be32(lab, 0);
  if (lmagic != 0x00000801)
    throw std::invalid_argument("idx labels: bad magic at byte offset 0");
  std::uint32_t ln = detail::read_be32(lab, 4);
  if (ln != n)
    throw std::invalid_argument("idx: " + std::to_string(n) + " images vs " + std::to_string(ln) +
                                " labels");
  Dataset d;
  d.sample_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!img)
      throw std::invalid_argument("idx images: truncated at byte offset " +
                                  std::to_string(16 + static_cast<std::size_t>(i) * buf.size()));
    std::vector<double> v(buf.size());
    for (std::size_t j = 0; j < buf.size(); ++j) v[j] = buf[j] / 255.0;
    d.x.push_back(std::move(v));
    int y = lab.get();
    if (y == EOF)
      throw std::invalid_argument("idx labels: truncated at byte offset " + std::to_string(8 + i));
    d.y.push_back(y);
    max_label = std::max(max_label, y);
  }
  d.classes = max_label + 1;
  d.finalize_splits(seed);
  return d;
}

// CSV with header row: label,f0,f1,...
inline Dataset load_csv(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty file");
  std::size_t ncols = detail::split(line, ',').size();
  if (ncols < 2) throw std::invalid_argument("csv: header must be label,f0,...");
  Dataset d;
  int lineno = 1, max_label = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = detail::split(line, ',');
    if (f.size() != ncols)
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(ncols) + " fields, got " +
                                  std::to_string(f.size()));
    int label;
    try {
      label = std::stoi(f[0]);
    } catch (...) {
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": bad label '" + f[0] +
                                  "'");
    }
    if (label < 0)
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": label " +
                                  std::to_string(label) + " out of range");
    std::vector<double> v;
    for (std::size_t j = 1; j < f.size(); ++j) {
      try {
        v.push_back(std::stod(f[j]));
      } catch (...) {
        throw std::invalid_argument("csv line " + std::to_string(lineno) + ": bad number '" +
                                    f[j] + "'");
      }
    }
    d.x.push_back(std::move(v));
    d.y.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (d.x.empty()) throw std::invalid_argument("csv: no data rows");
  d.classes = max_label + 1;
  for (std::size_t i = 0; i < d.y.size(); ++i)
    if (d.y[i] >= d.classes)
      throw std::invalid_argument("csv: label out of range at row " + std::to_string(i + 2));
  d.sample_shape = detail::image_shape_for(ncols - 1);
  d.finalize_splits(seed);
  return d;
}

// Sources: synthetic:blobs, synthetic:rings, synthetic:digits (each with
// optional ?classes=&samples=&noise=), idx:<images>,<labels>, csv:<path>.
inline Dataset load_dataset(const std::string& source, std::uint64_t seed) {
  auto colon = source.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("dataset source '" + source + "' needs a scheme prefix");
  std::string scheme = source.substr(0, colon), rest = source.substr(colon + 1);
  if (scheme == "synthetic") {
    auto p = detail::parse_source_params(rest);
    int classes = static_cast<int>(p.get_long("classes", p.name == "rings" ? 2 : 3));
    int samples = static_cast<int>(p.get_long("samples", 600));
    if (p.name == "blobs") return make_blobs(classes, samples, p.get_double("noise", 0.5), seed);
    if (p.name == "rings") return make_rings(classes, samples, p.get_double("noise", 0.15), seed);
    if (p.name == "digits") return make_digits(samples, p.get_double("noise", 0.25), seed);
    throw std::invalid_argument("unknown synthetic dataset '" + p.name + "'");
  }
  if (scheme == "idx") {
    auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("idx source must be idx:<images>,<labels>");
    return load_idx(rest.substr(0, comma), rest.substr(comma + 1), seed);
  }
  if (scheme == "csv") return load_csv(rest, seed);
  throw std::invalid_argument("unknown dataset scheme '" + scheme + "'");
}

}  // namespace enos

#endif  // ENOS_DATA_HPP
