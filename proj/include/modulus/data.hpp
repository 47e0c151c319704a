#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modulus/error.hpp"
#include "modulus/io.hpp"
#include "modulus/nn.hpp"
#include "modulus/random.hpp"
#include "modulus/tensor.hpp"

namespace modulus {

enum class DatasetName { mnist, cifar10, cifar100 };

constexpr std::string_view name_of(DatasetName name) {
  switch (name) {
    case DatasetName::mnist: return "mnist";
    case DatasetName::cifar10: return "cifar10";
    case DatasetName::cifar100: return "cifar100";
  }
  return "unknown";
}

constexpr std::string_view display_name_of(DatasetName name) {
  switch (name) {
    case DatasetName::mnist: return "MNIST";
    case DatasetName::cifar10: return "CIFAR10";
    case DatasetName::cifar100: return "CIFAR100";
  }
  return "Unknown";
}

inline DatasetName parse_dataset_name(std::string_view name) {
  for (DatasetName d : {DatasetName::mnist, DatasetName::cifar10, DatasetName::cifar100}) {
    if (name_of(d) == name) return d;
  }
  throw ParameterError("unknown dataset '" + std::string(name) + "' (expected mnist, cifar10 or cifar100)");
}

/// Byte 0 maps to -1 and byte 255 to +1.
constexpr double normalize_pixel(std::uint8_t byte) { return static_cast<double>(byte) / 127.5 - 1.0; }

inline std::uint8_t denormalize_pixel(double value) {
  const double byte = std::nearbyint((value + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(byte, 0.0, 255.0));
}

/// Raw images (channel-major planes, one byte per pixel) with their labels.
struct ImageSet {
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct Dataset {
  DatasetName name = DatasetName::mnist;
  InputShape image;
  std::size_t classes = 10;
  ImageSet train;
  ImageSet test;

  std::size_t image_bytes() const noexcept { return image.channels * image.height * image.width; }

  /// First `train_count` training and `test_count` test examples.
  Dataset subset(std::size_t train_count, std::size_t test_count) const {
    Dataset out{name, image, classes, {}, {}};
    const auto take = [this](const ImageSet& from, std::size_t n) {
      n = std::min(n, from.size());
      ImageSet set;
      set.pixels.assign(from.pixels.begin(), from.pixels.begin() + static_cast<std::ptrdiff_t>(n * image_bytes()));
      set.labels.assign(from.labels.begin(), from.labels.begin() + static_cast<std::ptrdiff_t>(n));
      return set;
    };
    out.train = take(train, train_count);
    out.test = take(test, test_count);
    return out;
  }

  /// Centers every image on a larger canvas filled with `fill` (byte 0 is the
  /// normalized background -1).
  Dataset padded_to(std::size_t height, std::size_t width, std::uint8_t fill = 0) const {
    if (height < image.height || width < image.width) {
      throw ParameterError("cannot pad " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                           " images down to " + std::to_string(height) + "x" + std::to_string(width));
    }
    Dataset out{name, {image.channels, height, width}, classes, {}, {}};
    const std::size_t top = (height - image.height) / 2, left = (width - image.width) / 2;
    const auto pad = [&](const ImageSet& from) {
      ImageSet set;
      set.labels = from.labels;
      set.pixels.assign(from.size() * image.channels * height * width, fill);
      for (std::size_t i = 0; i < from.size(); ++i) {
        for (std::size_t c = 0; c < image.channels; ++c) {
          for (std::size_t y = 0; y < image.height; ++y) {
            const auto* src = from.pixels.data() + ((i * image.channels + c) * image.height + y) * image.width;
            auto* dst = set.pixels.data() + ((i * image.channels + c) * height + top + y) * width + left;
            std::copy(src, src + image.width, dst);
          }
        }
      }
      return set;
    };
    out.train = pad(train);
    out.test = pad(test);
    return out;
  }
};

/// Normalized N x C x H x W tensor of the selected examples.
template <typename T>
Tensor<T> gather_images(const Dataset& data, const ImageSet& set, std::span<const std::size_t> indices) {
  const std::size_t per = data.image_bytes();
  Tensor<T> out({indices.size(), data.image.channels, data.image.height, data.image.width});
  T* dst = out.data();
  for (std::size_t i : indices) {
    const std::uint8_t* src = set.pixels.data() + i * per;
    for (std::size_t k = 0; k < per; ++k) *dst++ = static_cast<T>(normalize_pixel(src[k]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX (MNIST) container: 0x00 0x00 <type> <ndims>, then ndims big-endian u32
// extents, then the raw payload.

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::span<const std::uint8_t> payload;
};

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

/// Validates the header against `expected_magic` and the payload length
/// against the declared extents exactly.
inline IdxArray parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic, const std::string& source) {
  const auto fail = [&](std::size_t offset, const std::string& what) {
    throw FormatError(source + " at offset " + std::to_string(offset) + ": " + what);
  };
  if (bytes.size() < 4) fail(0, "file too short for IDX magic");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08x, expected 0x%08x", magic, expected_magic);
    fail(0, buf);
  }
  const std::size_t ndims = expected_magic & 0xff;
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) fail(bytes.size(), "truncated header, need " + std::to_string(header) + " bytes");
  IdxArray out;
  std::size_t payload = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * d));
    payload *= out.dims.back();
  }
  if (bytes.size() - header != payload) {
    fail(header, "payload is " + std::to_string(bytes.size() - header) + " bytes, header declares " +
                     std::to_string(payload));
  }
  out.payload = bytes.subspan(header);
  return out;
}

namespace detail {

inline std::filesystem::path find_file(const std::filesystem::path& dir, std::span<const std::string_view> subdirs,
                                       std::string_view name, std::string_view fetch_hint) {
  if (std::filesystem::exists(dir / name)) return dir / name;
  for (std::string_view sub : subdirs) {
    if (std::filesystem::exists(dir / sub / name)) return dir / sub / name;
  }
  throw DataError("missing " + std::string(name) + " under " + dir.string() + "; run `" + std::string(fetch_hint) +
                  "` first");
}

inline ImageSet load_idx_pair(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto image_bytes = read_file_bytes(images_path);
  const auto label_bytes = read_file_bytes(labels_path);
  const IdxArray images = parse_idx(image_bytes, idx_images_magic, images_path.string());
  const IdxArray labels = parse_idx(label_bytes, idx_labels_magic, labels_path.string());
  if (images.dims[1] != 28 || images.dims[2] != 28) {
    throw FormatError(images_path.string() + " at offset 8: expected 28x28 images, header declares " +
                      std::to_string(images.dims[1]) + "x" + std::to_string(images.dims[2]));
  }
  if (images.dims[0] != labels.dims[0]) {
    throw FormatError(labels_path.string() + " at offset 4: " + std::to_string(labels.dims[0]) +
                      " labels for " + std::to_string(images.dims[0]) + " images in " + images_path.string());
  }
  ImageSet set;
  set.pixels.assign(images.payload.begin(), images.payload.end());
  set.labels.reserve(labels.payload.size());
  for (std::size_t i = 0; i < labels.payload.size(); ++i) {
    const int label = labels.payload[i];
    if (label > 9) {
      throw FormatError(labels_path.string() + " at offset " + std::to_string(8 + i) + ": label " +
                        std::to_string(label) + " outside [0, 10)");
    }
    set.labels.push_back(label);
  }
  return set;
}

}  // namespace detail

/// Reads the four canonical MNIST IDX files from `dir` (or `dir/mnist`).
inline Dataset load_mnist(const std::filesystem::path& dir) {
  static constexpr std::string_view subdirs[] = {"mnist", "MNIST/raw"};
  const std::string hint = "fetch --dataset mnist";
  Dataset data{DatasetName::mnist, {1, 28, 28}, 10, {}, {}};
  data.train = detail::load_idx_pair(detail::find_file(dir, subdirs, "train-images-idx3-ubyte", hint),
                                     detail::find_file(dir, subdirs, "train-labels-idx1-ubyte", hint));
  data.test = detail::load_idx_pair(detail::find_file(dir, subdirs, "t10k-images-idx3-ubyte", hint),
                                    detail::find_file(dir, subdirs, "t10k-labels-idx1-ubyte", hint));
  return data;
}

// ---------------------------------------------------------------------------
// CIFAR binary batches. CIFAR-10 records are <label><3072 pixels>; CIFAR-100
// records are <coarse label><fine label><3072 pixels>. Pixels are R, G, B
// planes of 32x32.

struct CifarFile {
  std::string name;
  std::size_t records;
};

struct CifarLayout {
  std::vector<CifarFile> train;
  CifarFile test;

  static CifarLayout canonical(int variant) {
    if (variant == 10) {
      CifarLayout layout;
      for (int i = 1; i <= 5; ++i) layout.train.push_back({"data_batch_" + std::to_string(i) + ".bin", 10000});
      layout.test = {"test_batch.bin", 10000};
      return layout;
    }
    if (variant == 100) return {{{"train.bin", 50000}}, {"test.bin", 10000}};
    throw ParameterError("cifar variant must be 10 or 100, got " + std::to_string(variant));
  }
};

inline constexpr std::size_t cifar_pixels = 3 * 32 * 32;

inline std::size_t cifar_record_bytes(int variant) { return variant == 100 ? cifar_pixels + 2 : cifar_pixels + 1; }

/// Parses one batch file; `expected_records` must match exactly.
inline void parse_cifar_records(std::span<const std::uint8_t> bytes, int variant, std::size_t expected_records,
                                const std::string& source, ImageSet& into) {
  const std::size_t record = cifar_record_bytes(variant);
  if (bytes.size() != expected_records * record) {
    throw FormatError(source + ": expected " + std::to_string(expected_records) + " records of " +
                      std::to_string(record) + " bytes (" + std::to_string(expected_records * record) +
                      " bytes), file holds " + std::to_string(bytes.size() / record) + " records and " +
                      std::to_string(bytes.size() % record) + " stray bytes");
  }
  const std::size_t label_offset = variant == 100 ? 1 : 0;
  const int classes = variant;
  into.pixels.reserve(into.pixels.size() + expected_records * cifar_pixels);
  for (std::size_t r = 0; r < expected_records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * record;
    const int label = rec[label_offset];
    if (label >= classes) {
      throw FormatError(source + " at offset " + std::to_string(r * record + label_offset) + ": label " +
                        std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
    into.labels.push_back(label);
    const std::uint8_t* px = rec + record - cifar_pixels;
    into.pixels.insert(into.pixels.end(), px, px + cifar_pixels);
  }
}

inline Dataset load_cifar(const std::filesystem::path& dir, int variant,
                          const std::optional<CifarLayout>& layout_override = std::nullopt) {
  const CifarLayout layout = layout_override ? *layout_override : CifarLayout::canonical(variant);
  const std::string canonical_subdir = variant == 100 ? "cifar-100-binary" : "cifar-10-batches-bin";
  const std::string_view subdirs[] = {canonical_subdir};
  const std::string hint = "fetch --dataset cifar" + std::to_string(variant);
  Dataset data{variant == 100 ? DatasetName::cifar100 : DatasetName::cifar10,
               {3, 32, 32},
               static_cast<std::size_t>(variant),
               {},
               {}};
  for (const CifarFile& file : layout.train) {
    const auto path = detail::find_file(dir, subdirs, file.name, hint);
    parse_cifar_records(read_file_bytes(path), variant, file.records, path.string(), data.train);
  }
  const auto test_path = detail::find_file(dir, subdirs, layout.test.name, hint);
  parse_cifar_records(read_file_bytes(test_path), variant, layout.test.records, test_path.string(), data.test);
  return data;
}

inline Dataset load_dataset(DatasetName name, const std::filesystem::path& dir) {
  switch (name) {
    case DatasetName::mnist: return load_mnist(dir);
    case DatasetName::cifar10: return load_cifar(dir, 10);
    case DatasetName::cifar100: return load_cifar(dir, 100);
  }
  throw ParameterError("unknown dataset");
}

// ---------------------------------------------------------------------------

template <typename T>
struct Batch {
  Tensor<T> images;
  std::vector<int> labels;
  /// Training-set indices of the examples in this batch.
  std::vector<std::size_t> indices;
};

/// Seeded mini-batches over the training split. The visiting order of an
/// epoch is a pure function of (seed, epoch); the last batch may be short.
class BatchStream {
 public:
  BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
      : data_(&data), batch_size_(batch_size), seed_(seed) {
    if (batch_size == 0) throw ParameterError("batch size must be positive");
    if (data.train.size() == 0) throw DataError("training split is empty");
  }

  std::size_t batch_size() const noexcept { return batch_size_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t batches_per_epoch() const noexcept { return (data_->train.size() + batch_size_ - 1) / batch_size_; }

  std::vector<std::size_t> order(std::size_t epoch) const {
    Rng rng = Rng::derived(seed_, epoch);
    return permutation(data_->train.size(), rng);
  }

  template <typename T>
  Batch<T> batch(std::span<const std::size_t> order, std::size_t index) const {
    const std::size_t begin = index * batch_size_;
    const std::size_t end = std::min(order.size(), begin + batch_size_);
    if (begin >= end) throw ParameterError("batch index " + std::to_string(index) + " past end of epoch");
    Batch<T> out;
    out.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
    out.images = gather_images<T>(*data_, data_->train, out.indices);
    for (std::size_t i : out.indices) out.labels.push_back(data_->train.labels[i]);
    return out;
  }

  /// Lazily materialized batches of one epoch.
  template <typename T>
  class Epoch {
   public:
    Epoch(const BatchStream& stream, std::size_t epoch) : stream_(&stream), order_(stream.order(epoch)) {}

    std::size_t size() const noexcept { return stream_->batches_per_epoch(); }
    Batch<T> operator[](std::size_t i) const { return stream_->batch<T>(order_, i); }
    const std::vector<std::size_t>& order() const noexcept { return order_; }

    class iterator {
     public:
      using value_type = Batch<T>;
      using difference_type = std::ptrdiff_t;
      iterator(const Epoch* epoch, std::size_t i) : epoch_(epoch), i_(i) {}
      Batch<T> operator*() const { return (*epoch_)[i_]; }
      iterator& operator++() {
        ++i_;
        return *this;
      }
      bool operator==(const iterator& other) const { return i_ == other.i_; }

     private:
      const Epoch* epoch_;
      std::size_t i_;
    };
    iterator begin() const { return {this, 0}; }
    iterator end() const { return {this, size()}; }

   private:
    const BatchStream* stream_;
    std::vector<std::size_t> order_;
  };

  template <typename T>
  Epoch<T> batches(std::size_t epoch) const {
    return Epoch<T>(*this, epoch);
  }

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace modulus
