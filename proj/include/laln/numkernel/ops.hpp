// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "laln/numkernel/value.hpp"

// Differentiable operation catalog. Every function checks operand shapes and
// throws ShapeError naming the op and the offending shapes. Axis arguments
// apply to rank-1 and rank-2 arrays only.
namespace laln::nk {

Value add(const Value& a, const Value& b);
// Sum of equally shaped values.
Value add_n(const std::vector<Value>& xs);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // element-wise
Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);

// (m,k)x(k,n) -> (m,n); (m,k)x(k) -> (m); (k)x(k,n) -> (n)
Value matmul(const Value& a, const Value& b);
// w (m,k), x (k), b (m) -> w x + b
Value affine(const Value& w, const Value& x, const Value& b);
Value transpose(const Value& a);
Value reshape(const Value& a, Shape shape);

// Concatenation along axis 0.
Value concat(const std::vector<Value>& parts);
// n vectors of length d -> (d, n) matrix, one column per vector.
Value stack_cols(const std::vector<Value>& cols);
Value column(const Value& m, std::size_t j);
Value row(const Value& m, std::size_t i);
// m (r,c) plus v (r) added to every column.
Value add_col(const Value& m, const Value& v);

Value tanh(const Value& a);
Value relu(const Value& a);
Value sigmoid(const Value& a);
Value exp(const Value& a);
Value log(const Value& a);
Value clamp(const Value& a, double lo, double hi);

Value softmax(const Value& a, std::size_t axis = 0);
Value log_softmax(const Value& a, std::size_t axis = 0);
Value logsumexp(const Value& a, std::size_t axis = 0);
Value sum(const Value& a, std::size_t axis);
Value mean(const Value& a, std::size_t axis);
Value sum_all(const Value& a);

// Row `id` of an (n, e) table.
Value embedding(const Value& table, std::size_t id);
// Element k of a rank-1 value, as a scalar.
Value pick(const Value& a, std::size_t k);
Value dot(const Value& a, const Value& b);
// Same value with no gradient path.
Value detach(const Value& a);

/// Gated recurrent cell step. wx (3H, I), wh (3H, H), b (3H) with gate
/// blocks ordered reset, update, candidate:
///   r = sigmoid(Wx_r x + Wh_r h + b_r)
///   u = sigmoid(Wx_u x + Wh_u h + b_u)
///   n = tanh(Wx_n x + b_n + r * (Wh_n h))
///   h' = (1 - u) * n + u * h
Value gru_step(const Value& x, const Value& h, const Value& wx, const Value& wh, const Value& b);

}  // namespace laln::nk
