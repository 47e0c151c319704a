#pragma once

#include <zlib.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "modulus/error.hpp"

namespace modulus::archive {

/// Inflates a complete gzip stream (concatenated members allowed).
inline std::string gunzip(std::string_view compressed, const std::string& source) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw DataError(source + ": zlib init failed");
  std::string out;
  char buf[1 << 16];
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  int rc = Z_OK;
  for (;;) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError(source + ": corrupt gzip stream at input offset " + std::to_string(zs.total_in));
    }
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_STREAM_END) {
      if (zs.avail_in == 0) break;
      inflateReset(&zs);
    } else if (zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw DataError(source + ": truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

struct TarEntry {
  std::string name;
  std::string contents;
};

namespace detail {

inline std::uint64_t parse_octal(std::string_view field, const std::string& source, std::size_t offset) {
  std::uint64_t v = 0;
  bool any = false;
  for (char c : field) {
    if (c == '\0' || c == ' ') {
      if (any) break;
      continue;
    }
    if (c < '0' || c > '7') throw FormatError(source + " at offset " + std::to_string(offset) + ": bad tar size field");
    v = v * 8 + static_cast<std::uint64_t>(c - '0');
    any = true;
  }
  return v;
}

}  // namespace detail

/// Regular files of a ustar (or GNU/pax) archive. Directory, link and
/// extended-header entries are skipped.
inline std::vector<TarEntry> untar(std::string_view tar, const std::string& source) {
  std::vector<TarEntry> entries;
  std::size_t pos = 0;
  while (pos + 512 <= tar.size()) {
    const std::string_view header = tar.substr(pos, 512);
    if (header.find_first_not_of('\0') == std::string_view::npos) break;
    unsigned checksum = 0;
    for (std::size_t i = 0; i < 512; ++i) {
      checksum += (i >= 148 && i < 156) ? unsigned{' '} : static_cast<unsigned char>(header[i]);
    }
    if (checksum != detail::parse_octal(header.substr(148, 8), source, pos + 148)) {
      throw FormatError(source + " at offset " + std::to_string(pos) + ": tar header checksum mismatch");
    }
    std::string name(header.substr(0, 100).substr(0, header.substr(0, 100).find('\0')));
    const std::string_view prefix = header.substr(345, 155).substr(0, header.substr(345, 155).find('\0'));
    if (header.substr(257, 5) == "ustar" && !prefix.empty()) name = std::string(prefix) + "/" + name;
    const std::uint64_t size = detail::parse_octal(header.substr(124, 12), source, pos + 124);
    const char type = header[156];
    pos += 512;
    if (pos + size > tar.size()) throw FormatError(source + ": tar entry " + name + " runs past end of archive");
    if (type == '0' || type == '\0') entries.push_back({name, std::string(tar.substr(pos, size))});
    pos += (size + 511) / 512 * 512;
  }
  return entries;
}

}  // namespace modulus::archive
