// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/align/special.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

namespace laln::align {

double digamma(double x) { return boost::math::digamma(x); }
double trigamma(double x) { return boost::math::trigamma(x); }
double log_gamma(double x) { return std::lgamma(x); }
double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }
double gamma_p_inv(double a, double p) { return boost::math::gamma_p_inv(a, p); }

}  // namespace laln::align
