// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "laln/numkernel/array.hpp"

namespace laln::testing {

inline nk::Array gaussian(nk::Shape shape, std::mt19937_64& gen, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  nk::Array a(std::move(shape));
  for (double& v : a.storage()) v = nd(gen);
  return a;
}

inline nk::Array positive(nk::Shape shape, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> ud(0.2, 2.0);
  nk::Array a(std::move(shape));
  for (double& v : a.storage()) v = ud(gen);
  return a;
}

}  // namespace laln::testing
