// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "laln/numkernel/array.hpp"

namespace laln::nk {

using NamedArrays = std::map<std::string, Array>;

// Binary archive layout, all integers 64-bit little-endian unsigned:
//   "LALN1"
//   repeated until EOF:
//     name length, UTF-8 name bytes, rank, extents..., IEEE-754 LE doubles
void write_archive(std::ostream& os, const NamedArrays& arrays);
NamedArrays read_archive(std::istream& is);

void save_archive(const std::filesystem::path& path, const NamedArrays& arrays);
NamedArrays load_archive(const std::filesystem::path& path);

}  // namespace laln::nk
