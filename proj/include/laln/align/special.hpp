// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Thin wrappers over Boost.Math special functions.
namespace laln::align {

double digamma(double x);
double trigamma(double x);
double log_gamma(double x);
// Regularised lower incomplete gamma P(a, x) and its inverse in x.
double gamma_p(double a, double x);
double gamma_p_inv(double a, double p);

}  // namespace laln::align
