#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "modulus/data.hpp"
#include "modulus/train.hpp"
#include "support.hpp"

using namespace modulus;
using modulus::fixtures::TempDir;

namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string cifar_file(int variant, std::size_t records, std::uint64_t seed) {
  Rng rng(seed);
  std::string out;
  for (std::size_t r = 0; r < records; ++r) {
    if (variant == 100) {
      out.push_back(static_cast<char>(rng.below(20)));
      out.push_back(static_cast<char>(rng.below(100)));
    } else {
      out.push_back(static_cast<char>(r % 10));
    }
    for (std::size_t p = 0; p < cifar_pixels; ++p) out.push_back(static_cast<char>(rng.below(256)));
  }
  return out;
}

}  // namespace

TEST(Normalize, ByteEndpoints) {
  EXPECT_EQ(normalize_pixel(0), -1.0);
  EXPECT_EQ(normalize_pixel(255), 1.0);
  EXPECT_NEAR(normalize_pixel(128), 1.0 / 255.0, 1e-15);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(denormalize_pixel(normalize_pixel(static_cast<std::uint8_t>(b))), b);
}

TEST(Idx, ParsesValidArrays) {
  const std::string bytes = fixtures::idx_bytes(idx_images_magic, {2, 28, 28}, std::vector<std::uint8_t>(2 * 784, 7));
  const IdxArray a = parse_idx(as_bytes(bytes), idx_images_magic, "x");
  EXPECT_EQ(a.dims, (std::vector<std::uint32_t>{2, 28, 28}));
  EXPECT_EQ(a.payload.size(), 2u * 784u);
}

TEST(Idx, WrongMagicNamesOffset) {
  const std::string bytes = fixtures::idx_bytes(idx_labels_magic, {3}, {1, 2, 3});
  try {
    parse_idx(as_bytes(bytes), idx_images_magic, "labels.idx");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("labels.idx at offset 0"), std::string::npos) << e.what();
  }
}

TEST(Idx, EveryHeaderByteCorruptionIsDetected) {
  const std::vector<std::uint8_t> payload(3 * 784, 1);
  const std::string images = fixtures::idx_bytes(idx_images_magic, {3, 28, 28}, payload);
  for (std::size_t i = 0; i < 16; ++i) {
    std::string bad = images;
    bad[i] = static_cast<char>(bad[i] ^ 0x40);
    EXPECT_THROW(parse_idx(as_bytes(bad), idx_images_magic, "img"), FormatError) << "byte " << i;
  }
  const std::string labels = fixtures::idx_bytes(idx_labels_magic, {3}, {0, 1, 2});
  for (std::size_t i = 0; i < 8; ++i) {
    std::string bad = labels;
    bad[i] = static_cast<char>(bad[i] ^ 0x40);
    EXPECT_THROW(parse_idx(as_bytes(bad), idx_labels_magic, "lbl"), FormatError) << "byte " << i;
  }
}

TEST(Idx, TruncationAndTrailingBytes) {
  const std::string bytes = fixtures::idx_bytes(idx_labels_magic, {3}, {0, 1, 2});
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    EXPECT_THROW(parse_idx(as_bytes(bytes.substr(0, len)), idx_labels_magic, "lbl"), FormatError) << len;
  }
  EXPECT_THROW(parse_idx(as_bytes(bytes + "x"), idx_labels_magic, "lbl"), FormatError);
}

TEST(Mnist, LoadsSyntheticFilesAndRejectsMismatches) {
  TempDir dir;
  const Dataset data = fixtures::synthetic_mnist(30, 10);
  fixtures::write_mnist_idx(data, dir / "mnist");
  const Dataset back = load_mnist(dir.path());
  EXPECT_EQ(back.train.pixels, data.train.pixels);
  EXPECT_EQ(back.train.labels, data.train.labels);
  EXPECT_EQ(back.test.size(), 10u);

  // Label file disagreeing with image count.
  write_file_atomic(dir / "mnist/t10k-labels-idx1-ubyte",
                    fixtures::idx_bytes(idx_labels_magic, {9}, std::vector<std::uint8_t>(9, 1)));
  EXPECT_THROW(load_mnist(dir.path()), FormatError);
  // Label out of range.
  write_file_atomic(dir / "mnist/t10k-labels-idx1-ubyte",
                    fixtures::idx_bytes(idx_labels_magic, {10}, std::vector<std::uint8_t>(10, 10)));
  EXPECT_THROW(load_mnist(dir.path()), FormatError);
}

TEST(Mnist, MissingFilesNameTheFetchCommand) {
  TempDir dir;
  try {
    load_mnist(dir.path());
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("missing train-"), std::string::npos) << msg;
    EXPECT_NE(msg.find("fetch --dataset mnist"), std::string::npos) << msg;
  }
  EXPECT_THROW(load_cifar(dir.path(), 10), DataError);
}

TEST(Cifar, TenThousandRecordsPerBatch) {
  ImageSet set;
  const std::string bytes = cifar_file(10, 10000, 1);
  ASSERT_EQ(bytes.size(), 30'730'000u);
  parse_cifar_records(as_bytes(bytes), 10, 10000, "batch", set);
  EXPECT_EQ(set.size(), 10000u);
  EXPECT_EQ(set.labels[13], 3);
  EXPECT_EQ(std::vector<std::uint8_t>(set.pixels.begin(), set.pixels.begin() + 3072),
            std::vector<std::uint8_t>(bytes.begin() + 1, bytes.begin() + 3073));
}

TEST(Cifar, HundredUsesFineLabel) {
  ImageSet set;
  const std::string bytes = cifar_file(100, 500, 2);
  parse_cifar_records(as_bytes(bytes), 100, 500, "train.bin", set);
  std::set<int> seen;
  for (std::size_t r = 0; r < 500; ++r) {
    EXPECT_EQ(set.labels[r], static_cast<std::uint8_t>(bytes[r * 3074 + 1]));
    seen.insert(set.labels[r]);
  }
  EXPECT_GT(*seen.rbegin(), 19);
  EXPECT_LE(*seen.rbegin(), 99);
  EXPECT_GE(*seen.begin(), 0);
}

TEST(Cifar, WrongLengthReportsRecordArithmetic) {
  ImageSet set;
  const std::string bytes = cifar_file(10, 3, 3) + "xy";
  try {
    parse_cifar_records(as_bytes(bytes), 10, 3, "b.bin", set);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 3 records of 3073 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2 stray bytes"), std::string::npos) << msg;
  }
  std::string bad_label = cifar_file(10, 2, 4);
  bad_label[3073] = 10;
  EXPECT_THROW(parse_cifar_records(as_bytes(bad_label), 10, 2, "b.bin", set), FormatError);
}

TEST(Cifar, CanonicalLayoutLoads) {
  TempDir dir;
  const auto sub = dir / "cifar-10-batches-bin";
  std::filesystem::create_directories(sub);
  const std::string batch = cifar_file(10, 10000, 5);
  for (int i = 1; i <= 5; ++i) write_file_atomic(sub / ("data_batch_" + std::to_string(i) + ".bin"), batch);
  write_file_atomic(sub / "test_batch.bin", batch);
  const Dataset data = load_dataset(DatasetName::cifar10, dir.path());
  EXPECT_EQ(data.train.size(), 50'000u);
  EXPECT_EQ(data.test.size(), 10'000u);
  EXPECT_EQ(data.image, (InputShape{3, 32, 32}));
  EXPECT_EQ(data.classes, 10u);
}

TEST(Cifar, LayoutOverride) {
  TempDir dir;
  write_file_atomic(dir / "a.bin", cifar_file(100, 4, 6));
  write_file_atomic(dir / "b.bin", cifar_file(100, 2, 7));
  const Dataset data = load_cifar(dir.path(), 100, CifarLayout{{{"a.bin", 4}}, {"b.bin", 2}});
  EXPECT_EQ(data.train.size(), 4u);
  EXPECT_EQ(data.test.size(), 2u);
  EXPECT_EQ(data.classes, 100u);
}

TEST(Gather, NormalizesInChannelMajorOrder) {
  Dataset data{DatasetName::cifar10, {3, 32, 32}, 10, {}, {}};
  ImageSet set;
  set.labels = {1, 2};
  for (std::size_t i = 0; i < 2 * cifar_pixels; ++i) set.pixels.push_back(static_cast<std::uint8_t>(i % 256));
  data.train = set;
  const std::vector<std::size_t> idx = {1};
  const auto t = gather_images<double>(data, data.train, idx);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(t.at({0, 0, 0, 0}), normalize_pixel(static_cast<std::uint8_t>(cifar_pixels % 256)));
  EXPECT_EQ(t.at({0, 2, 31, 31}), normalize_pixel(static_cast<std::uint8_t>((2 * cifar_pixels - 1) % 256)));
}

TEST(Padding, CentersImages) {
  Dataset data = fixtures::synthetic_mnist(3, 2);
  const Dataset padded = data.padded_to(32, 32);
  EXPECT_EQ(padded.train.pixels.size(), 3u * 1024u);
  EXPECT_EQ(padded.train.pixels[1024 + 2 * 32 + 2], data.train.pixels[784]);
  EXPECT_THROW(data.padded_to(20, 32), ParameterError);
}

TEST(BatchStream, DeterministicPerSeedAndEpoch) {
  const Dataset data = fixtures::synthetic_mnist(1000, 10);
  const BatchStream a(data, 128, 42), b(data, 128, 42), c(data, 128, 43);
  EXPECT_EQ(a.order(0), b.order(0));
  EXPECT_EQ(a.order(3), b.order(3));
  EXPECT_NE(a.order(0), c.order(0));
  EXPECT_NE(a.order(0), a.order(1));
  EXPECT_EQ(a.batches<float>(0)[2].images, b.batches<float>(0)[2].images);
}

TEST(BatchStream, EpochVisitsEveryExampleOnce) {
  const Dataset data = fixtures::synthetic_mnist(1000, 10);
  const BatchStream stream(data, 128, 9);
  EXPECT_EQ(stream.batches_per_epoch(), 8u);
  std::vector<std::size_t> seen;
  std::multiset<int> labels;
  std::size_t last = 0;
  for (const Batch<float>& batch : stream.batches<float>(0)) {
    EXPECT_EQ(batch.images.dim(0), batch.labels.size());
    seen.insert(seen.end(), batch.indices.begin(), batch.indices.end());
    labels.insert(batch.labels.begin(), batch.labels.end());
    last = batch.labels.size();
  }
  EXPECT_EQ(last, 1000u - 7u * 128u);
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 1000; ++i) ASSERT_EQ(seen[i], i);
  EXPECT_EQ(labels, std::multiset<int>(data.train.labels.begin(), data.train.labels.end()));
}

TEST(BatchStream, NeverTouchesTestSplit) {
  Dataset data = fixtures::synthetic_mnist(50, 20);
  const BatchStream stream(data, 16, 1);
  const auto before = stream.batches<float>(0)[0].images;
  for (auto& p : data.test.pixels) p = static_cast<std::uint8_t>(255 - p);
  data.test.labels.assign(data.test.size(), 9);
  EXPECT_EQ(stream.batches<float>(0)[0].images, before);
}

TEST(BatchStream, RejectsDegenerateInput) {
  const Dataset data = fixtures::synthetic_mnist(10, 10);
  EXPECT_THROW(BatchStream(data, 0, 1), ParameterError);
  Dataset empty = data.subset(0, 10);
  EXPECT_THROW(BatchStream(empty, 4, 1), DataError);
  const BatchStream s(data, 4, 1);
  const auto order = s.order(0);
  EXPECT_THROW(s.batch<float>(order, 3), ParameterError);
}
