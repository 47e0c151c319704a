#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modulus/data.hpp"

namespace modulus::fetch {

struct Options {
  std::vector<DatasetName> datasets;
  std::filesystem::path data_dir;
  /// Read the archives from this directory instead of downloading them.
  std::optional<std::filesystem::path> from;
};

/// Downloads (or copies), unpacks and size-checks each dataset. Throws
/// DataError on any failure.
void run(const Options& options);

}  // namespace modulus::fetch
