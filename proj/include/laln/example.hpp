// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "laln/numkernel/array.hpp"

namespace laln {

// Reserved target ids. Source vocabularies reserve only kUnk.
inline constexpr std::size_t kUnk = 0;
inline constexpr std::size_t kBos = 1;
inline constexpr std::size_t kEos = 2;

/// One observation. Sequence tasks carry source ids in `src` and a target
/// ending in kEos; set tasks carry object features (F, T), question ids in
/// `src` and a single answer id in `tgt`.
struct Example {
  std::vector<std::size_t> src;
  std::vector<std::size_t> tgt;
  nk::Array features;
  std::vector<long> gold;  // per output step, -1 where unknown

  bool is_set() const { return features.rank() == 2; }
  std::size_t positions() const { return is_set() ? features.cols() : src.size(); }
  std::size_t steps() const { return tgt.size(); }
};

}  // namespace laln
