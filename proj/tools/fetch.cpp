#include "fetch.hpp"

#include <httplib.h>

#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "archive.hpp"
#include "modulus/io.hpp"

namespace modulus::fetch {
namespace {

struct Mirror {
  std::string host;
  std::string path;
};

struct Archive {
  std::string file;
  std::vector<Mirror> mirrors;
  /// Extracted file name under the dataset directory -> expected byte count.
  std::vector<std::pair<std::string, std::size_t>> expected;
  bool tarball;
};

std::vector<Archive> archives_for(DatasetName name) {
  switch (name) {
    case DatasetName::mnist: {
      std::vector<Archive> out;
      const std::pair<const char*, std::size_t> files[] = {{"train-images-idx3-ubyte", 47'040'016},
                                                           {"train-labels-idx1-ubyte", 60'008},
                                                           {"t10k-images-idx3-ubyte", 7'840'016},
                                                           {"t10k-labels-idx1-ubyte", 10'008}};
      for (const auto& [file, bytes] : files) {
        const std::string gz = std::string(file) + ".gz";
        out.push_back({gz,
                       {{"https://ossci-datasets.s3.amazonaws.com", "/mnist/" + gz},
                        {"https://storage.googleapis.com", "/cvdf-datasets/mnist/" + gz}},
                       {{file, bytes}},
                       false});
      }
      return out;
    }
    case DatasetName::cifar10: {
      Archive a{"cifar-10-binary.tar.gz", {{"https://www.cs.toronto.edu", "/~kriz/cifar-10-binary.tar.gz"}}, {}, true};
      for (int i = 1; i <= 5; ++i) a.expected.push_back({"data_batch_" + std::to_string(i) + ".bin", 30'730'000});
      a.expected.push_back({"test_batch.bin", 30'730'000});
      return {a};
    }
    case DatasetName::cifar100:
      return {{"cifar-100-binary.tar.gz",
               {{"https://www.cs.toronto.edu", "/~kriz/cifar-100-binary.tar.gz"}},
               {{"train.bin", 153'700'000}, {"test.bin", 30'740'000}},
               true}};
  }
  throw ParameterError("unknown dataset");
}

std::string subdir_for(DatasetName name) {
  switch (name) {
    case DatasetName::mnist: return "mnist";
    case DatasetName::cifar10: return "cifar-10-batches-bin";
    case DatasetName::cifar100: return "cifar-100-binary";
  }
  return {};
}

std::string download(const Archive& archive) {
  std::string errors;
  for (const Mirror& m : archive.mirrors) {
    std::cerr << "fetch: GET " << m.host << m.path << '\n';
    httplib::Client client(m.host);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    const auto res = client.Get(m.path);
    if (res && res->status == 200) return res->body;
    errors += " " + m.host + m.path + " (" +
              (res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error())) + ")";
  }
  throw DataError("could not download " + archive.file + ":" + errors);
}

std::string_view basename(std::string_view path) {
  const auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

}  // namespace

void run(const Options& options) {
  for (DatasetName name : options.datasets) {
    const std::filesystem::path dir = options.data_dir / subdir_for(name);
    std::filesystem::create_directories(dir);
    for (const Archive& archive : archives_for(name)) {
      const std::string raw = options.from ? read_file_text(*options.from / archive.file) : download(archive);
      const std::string unpacked = archive::gunzip(raw, archive.file);
      std::vector<archive::TarEntry> entries;
      if (archive.tarball) {
        entries = archive::untar(unpacked, archive.file);
      } else {
        entries.push_back({archive.expected.front().first, unpacked});
      }
      for (const auto& [file, bytes] : archive.expected) {
        const archive::TarEntry* match = nullptr;
        for (const auto& e : entries) {
          if (basename(e.name) == file) match = &e;
        }
        if (match == nullptr) throw DataError(archive.file + " does not contain " + file);
        if (match->contents.size() != bytes) {
          throw DataError(file + " from " + archive.file + " has " + std::to_string(match->contents.size()) +
                          " bytes, expected " + std::to_string(bytes));
        }
        write_file_atomic(dir / file, match->contents);
        std::cerr << "fetch: wrote " << (dir / file).string() << " (" << bytes << " bytes)\n";
      }
    }
  }
}

}  // namespace modulus::fetch
