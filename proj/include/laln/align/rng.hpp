// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace laln::align {

/// Reproducible random stream. The engine (mt19937_64 seeded through
/// std::seed_seq) and every transform below are fully specified, so a given
/// (seed, stream) pair yields identical draws on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double gumbel();
  // Marsaglia-Tsang squeeze; alpha < 1 uses the U^(1/alpha) boost. Returns
  // the log of a Gamma(alpha, 1) draw so tiny-alpha draws do not underflow.
  double log_gamma_draw(double alpha);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

// Stream id derived from structured coordinates (epoch, example, ...).
std::uint64_t stream_id(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace laln::align
