// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/numkernel/archive.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "laln/error.hpp"

namespace laln::nk {

namespace {

constexpr char kMagic[] = "LALN1";
constexpr std::size_t kMagicLen = 5;

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

bool get_u64(std::istream& is, std::uint64_t& v) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

std::uint64_t must_u64(std::istream& is, const char* what) {
  std::uint64_t v = 0;
  if (!get_u64(is, v)) throw InputError(std::string("archive: truncated while reading ") + what);
  return v;
}

}  // namespace

void write_archive(std::ostream& os, const NamedArrays& arrays) {
  os.write(kMagic, kMagicLen);
  for (const auto& [name, arr] : arrays) {
    put_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(os, arr.rank());
    for (std::size_t d : arr.shape()) put_u64(os, d);
    for (double v : arr.values()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
}

NamedArrays read_archive(std::istream& is) {
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw InputError("archive: bad magic, expected LALN1");
  }
  NamedArrays out;
  std::uint64_t name_len = 0;
  while (get_u64(is, name_len)) {
    if (name_len > (1u << 20)) throw InputError("archive: implausible name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name_len))) throw InputError("archive: truncated name");
    const std::uint64_t rank = must_u64(is, "rank");
    if (rank > 8) throw InputError("archive: implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = must_u64(is, "extent");
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = std::bit_cast<double>(must_u64(is, "payload"));
    out.emplace(std::move(name), Array(std::move(shape), std::move(data)));
  }
  return out;
}

void save_archive(const std::filesystem::path& path, const NamedArrays& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_archive(os, arrays);
  if (!os) throw IoError("write failed: " + path.string());
}

NamedArrays load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_archive(is);
}

}  // namespace laln::nk
