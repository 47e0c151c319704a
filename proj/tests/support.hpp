#pragma once

// Shared fixtures: temporary directories, IDX writers and a small learnable
// synthetic image set shaped like MNIST.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "modulus/data.hpp"
#include "modulus/io.hpp"
#include "modulus/random.hpp"

namespace modulus::fixtures {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "modulus") {
    Rng rng(static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)) ^
            static_cast<std::uint64_t>(std::filesystem::file_time_type::clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rng.next()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string idx_bytes(std::uint32_t magic, const std::vector<std::uint32_t>& dims,
                             const std::vector<std::uint8_t>& payload) {
  std::string out;
  const auto be32 = [&](std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
  };
  be32(magic);
  for (std::uint32_t d : dims) be32(d);
  out.append(payload.begin(), payload.end());
  return out;
}

/// Ten noisy class prototypes of 28x28 bytes: each class lights a different
/// set of 4x4 blocks. Balanced labels, linearly separable in expectation.
inline ImageSet synthetic_digits(std::size_t count, std::uint64_t seed) {
  Rng proto_rng(1234);
  std::vector<std::vector<std::uint8_t>> prototypes(10, std::vector<std::uint8_t>(28 * 28, 0));
  for (auto& proto : prototypes) {
    for (int block = 0; block < 12; ++block) {
      const std::size_t by = proto_rng.below(7) * 4, bx = proto_rng.below(7) * 4;
      for (std::size_t y = by; y < by + 4; ++y) {
        for (std::size_t x = bx; x < bx + 4; ++x) proto[y * 28 + x] = 220;
      }
    }
  }
  Rng rng(seed);
  ImageSet set;
  set.pixels.reserve(count * 28 * 28);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 10);
    set.labels.push_back(label);
    for (std::uint8_t p : prototypes[static_cast<std::size_t>(label)]) {
      const double noisy = static_cast<double>(p) + 60.0 * rng.normal();
      set.pixels.push_back(static_cast<std::uint8_t>(std::clamp(noisy, 0.0, 255.0)));
    }
  }
  return set;
}

inline Dataset synthetic_mnist(std::size_t train, std::size_t test, std::uint64_t seed = 7) {
  return {DatasetName::mnist, {1, 28, 28}, 10, synthetic_digits(train, seed), synthetic_digits(test, seed + 1)};
}

/// Writes `data` as the four canonical MNIST IDX files under `dir`.
inline void write_mnist_idx(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write_pair = [&](const ImageSet& set, const std::string& images, const std::string& labels) {
    const auto n = static_cast<std::uint32_t>(set.size());
    write_file_atomic(dir / images, idx_bytes(idx_images_magic, {n, 28, 28}, set.pixels));
    std::vector<std::uint8_t> label_bytes(set.labels.begin(), set.labels.end());
    write_file_atomic(dir / labels, idx_bytes(idx_labels_magic, {n}, label_bytes));
  };
  write_pair(data.train, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
  write_pair(data.test, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
}

}  // namespace modulus::fixtures
