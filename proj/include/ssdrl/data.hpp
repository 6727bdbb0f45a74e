#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssdrl/error.hpp"
#include "ssdrl/models.hpp"
#include "ssdrl/trainer.hpp"

namespace ssdrl {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off,
                          const std::string& path) {
  if (b.size() < off + 4) throw Error(ErrorKind::FormatError, "truncated header in " + path);
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace detail

/// Reads an IDX image file (magic 0x803) and label file (magic 0x801).
/// Pixels are scaled to [0, 1].
inline std::vector<Example> read_idx(const std::string& images_path,
                                     const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (detail::be32(img, 0, images_path) != kIdxImageMagic)
    throw Error(ErrorKind::FormatError, "bad image magic in " + images_path);
  if (detail::be32(lab, 0, labels_path) != kIdxLabelMagic)
    throw Error(ErrorKind::FormatError, "bad label magic in " + labels_path);
  const std::size_t count = detail::be32(img, 4, images_path);
  const std::size_t rows = detail::be32(img, 8, images_path);
  const std::size_t cols = detail::be32(img, 12, images_path);
  const std::size_t nlab = detail::be32(lab, 4, labels_path);
  if (count != nlab) throw Error(ErrorKind::FormatError, "image and label counts differ");
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + count * dim)
    throw Error(ErrorKind::FormatError, "truncated image data in " + images_path);
  if (lab.size() < 8 + count)
    throw Error(ErrorKind::FormatError, "truncated label data in " + labels_path);
  std::vector<Example> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    for (std::size_t p = 0; p < dim; ++p)
      x[static_cast<Eigen::Index>(p)] = img[16 + i * dim + p] / 255.0;
    out[i] = Example{std::move(x), static_cast<int>(lab[8 + i])};
  }
  return out;
}

/// Writes examples with features in [0, 1] as IDX files, rounding pixels to
/// the nearest of 256 levels.
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      const std::vector<Example>& examples, int rows, int cols) {
  std::ofstream img(images_path, std::ios::binary), lab(labels_path, std::ios::binary);
  if (!img || !lab) throw Error(ErrorKind::IoError, "cannot create IDX files");
  detail::put_be32(img, kIdxImageMagic);
  detail::put_be32(img, static_cast<std::uint32_t>(examples.size()));
  detail::put_be32(img, static_cast<std::uint32_t>(rows));
  detail::put_be32(img, static_cast<std::uint32_t>(cols));
  detail::put_be32(lab, kIdxLabelMagic);
  detail::put_be32(lab, static_cast<std::uint32_t>(examples.size()));
  for (const auto& z : examples) {
    detail::require(z.features.size() == static_cast<Eigen::Index>(rows) * cols,
                    ErrorKind::ShapeError, "example size does not match rows * cols");
    detail::require(z.label.has_value() && *z.label >= 0 && *z.label < 256,
                    ErrorKind::MissingLabel, "IDX labels must be present and < 256");
    for (Eigen::Index p = 0; p < z.features.size(); ++p) {
      const double v = std::clamp(z.features[p], 0.0, 1.0);
      img.put(static_cast<char>(std::lround(v * 255.0)));
    }
    lab.put(static_cast<char>(*z.label));
  }
  if (!img || !lab) throw Error(ErrorKind::IoError, "failed writing IDX files");
}

enum class DatasetKind { TwoGaussians, TwoMoons, Xor, MnistSubset };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::TwoGaussians: return "two-gaussians";
    case DatasetKind::TwoMoons: return "two-moons";
    case DatasetKind::Xor: return "xor";
    case DatasetKind::MnistSubset: return "mnist-subset";
  }
  return "?";
}

inline DatasetKind parse_dataset_kind(const std::string& s) {
  for (auto k : {DatasetKind::TwoGaussians, DatasetKind::TwoMoons, DatasetKind::Xor,
                 DatasetKind::MnistSubset})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::InvalidInput, "unknown dataset kind '" + s + "'");
}

struct DatasetSpec {
  DatasetKind kind = DatasetKind::TwoGaussians;
  int n = 100;
  double eta = 0.1;
  double noise = 1.0;
  std::uint64_t seed = 1;
  int n_test = 1000;
  /// Distance between the two class means (two-gaussians).
  double separation = 2.0;
  int dim = 2;
  /// Training and test IDX files for mnist-subset.
  std::string mnist_images, mnist_labels, mnist_test_images, mnist_test_labels;

  int labeled_count() const { return static_cast<int>(std::lround(eta * n)); }

  void validate() const {
    detail::require(n >= 10, ErrorKind::InvalidInput, "dataset needs n >= 10");
    detail::require(eta > 0.0 && eta <= 1.0, ErrorKind::InvalidInput, "eta must lie in (0, 1]");
    detail::require(noise >= 0.0, ErrorKind::InvalidInput, "noise must be >= 0");
    detail::require(n_test >= 1, ErrorKind::InvalidInput, "n_test must be >= 1");
    detail::require(dim >= 2, ErrorKind::InvalidInput, "dim must be >= 2");
    if (kind == DatasetKind::MnistSubset)
      detail::require(!mnist_images.empty() && !mnist_labels.empty() &&
                          !mnist_test_images.empty() && !mnist_test_labels.empty(),
                      ErrorKind::InvalidInput, "mnist-subset needs image and label paths");
  }
};

struct GeneratedData {
  SemiDataset train;
  std::vector<Example> test;
  int input_dim = 0;
  int num_classes = 0;
};

namespace detail {

inline Example draw_synthetic(const DatasetSpec& s, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int y = u(rng) < 0.5 ? 0 : 1;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.kind == DatasetKind::TwoGaussians ? s.dim : 2);
  switch (s.kind) {
    case DatasetKind::TwoGaussians:
      x[0] = (y == 0 ? -0.5 : 0.5) * s.separation;
      break;
    case DatasetKind::TwoMoons: {
      const double t = std::acos(-1.0) * u(rng);
      if (y == 0) {
        x << std::cos(t), std::sin(t);
      } else {
        x << 1.0 - std::cos(t), 0.5 - std::sin(t);
      }
      break;
    }
    case DatasetKind::Xor: {
      double a = 2.0 * u(rng) - 1.0, b = 2.0 * u(rng) - 1.0;
      if ((a * b > 0) != (y == 1)) b = -b;
      x << a, b;
      break;
    }
    case DatasetKind::MnistSubset: break;
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += s.noise * g(rng);
  return Example{std::move(x), y};
}

}  // namespace detail

/// Deterministic given spec.seed. The first round(eta n) points of a seeded
/// shuffle keep their labels; the rest are unlabeled with hidden labels.
inline GeneratedData generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Example> train, test;
  GeneratedData out;
  if (spec.kind == DatasetKind::MnistSubset) {
    auto pool = read_idx(spec.mnist_images, spec.mnist_labels);
    detail::require(static_cast<std::size_t>(spec.n) <= pool.size(), ErrorKind::InvalidInput,
                    "n exceeds the number of training images");
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < spec.n; ++i) train.push_back(std::move(pool[order[static_cast<std::size_t>(i)]]));
    test = read_idx(spec.mnist_test_images, spec.mnist_test_labels);
    if (static_cast<std::size_t>(spec.n_test) < test.size())
      test.resize(static_cast<std::size_t>(spec.n_test));
    out.input_dim = static_cast<int>(train.front().features.size());
    int mx = 0;
    for (const auto& z : train) mx = std::max(mx, *z.label);
    for (const auto& z : test) mx = std::max(mx, *z.label);
    out.num_classes = std::max(2, mx + 1);
  } else {
    for (int i = 0; i < spec.n; ++i) train.push_back(detail::draw_synthetic(spec, rng));
    for (int i = 0; i < spec.n_test; ++i) test.push_back(detail::draw_synthetic(spec, rng));
    out.input_dim = static_cast<int>(train.front().features.size());
    out.num_classes = 2;
  }
  std::vector<std::size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(static_cast<std::size_t>(spec.labeled_count()));
  std::sort(perm.begin(), perm.end());
  out.train = SemiDataset(std::move(train), perm);
  out.test = std::move(test);
  return out;
}

}  // namespace ssdrl
