// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/numkernel/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laln/error.hpp"

namespace laln::nk {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

Array& pgrad(Node& self, std::size_t k) { return self.parents[k]->grad_buffer(); }
bool wants(Node& self, std::size_t k) { return self.parents[k]->requires_grad; }

// Layout of the 1-D slices that an axis-wise op iterates over.
struct Slices {
  std::size_t count;
  std::size_t length;
  std::size_t stride;
  std::size_t step;  // offset between consecutive slice starts
  std::size_t at(std::size_t s, std::size_t i) const { return s * step + i * stride; }
};

Slices slices_of(const char* op, const Shape& shape, std::size_t axis) {
  if (shape.size() == 1 && axis == 0) return {1, shape[0], 1, 0};
  if (shape.size() == 2 && axis == 0) return {shape[1], shape[0], shape[1], 1};
  if (shape.size() == 2 && axis == 1) return {shape[0], shape[1], 1, shape[1]};
  shape_fail(op, shape, "does not support axis " + std::to_string(axis));
}

Shape reduced_shape(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

template <class Fwd, class Deriv>
Value unary(const Value& a, const char* op, Fwd fwd, Deriv deriv) {
  Array out = Array::zeros_like(a.array());
  const Array& x = a.array();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return make_result(std::move(out), {a},
                     [deriv](Node& self) {
                       const Array& x = self.parents[0]->value;
                       Array& gx = pgrad(self, 0);
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         gx[i] += self.grad[i] * deriv(x[i], self.value[i]);
                       }
                     },
                     op);
}

void require_same(const char* op, const Value& a, const Value& b) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

}  // namespace

Value add(const Value& a, const Value& b) {
  require_same("add", a, b);
  Array out = a.array();
  out += b.array();
  return make_result(std::move(out), {a, b},
                     [](Node& self) {
                       if (wants(self, 0)) pgrad(self, 0) += self.grad;
                       if (wants(self, 1)) pgrad(self, 1) += self.grad;
                     },
                     "add");
}

Value add_n(const std::vector<Value>& xs) {
  if (xs.empty()) throw ContractError("add_n needs at least one term");
  Array out = xs[0].array();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    require_same("add_n", xs[0], xs[k]);
    out += xs[k].array();
  }
  return make_result(std::move(out), xs,
                     [](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         if (wants(self, k)) pgrad(self, k) += self.grad;
                       }
                     },
                     "add_n");
}

Value sub(const Value& a, const Value& b) {
  require_same("sub", a, b);
  Array out = a.array();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.array()[i];
  return make_result(std::move(out), {a, b},
                     [](Node& self) {
                       if (wants(self, 0)) pgrad(self, 0) += self.grad;
                       if (wants(self, 1)) {
                         Array& g = pgrad(self, 1);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                       }
                     },
                     "sub");
}

Value mul(const Value& a, const Value& b) {
  require_same("mul", a, b);
  Array out = a.array();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.array()[i];
  return make_result(std::move(out), {a, b},
                     [](Node& self) {
                       const Array& x = self.parents[0]->value;
                       const Array& y = self.parents[1]->value;
                       if (wants(self, 0)) {
                         Array& g = pgrad(self, 0);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
                       }
                       if (wants(self, 1)) {
                         Array& g = pgrad(self, 1);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
                       }
                     },
                     "mul");
}

Value scale(const Value& a, double s) {
  Array out = a.array();
  out *= s;
  return make_result(std::move(out), {a},
                     [s](Node& self) {
                       Array& g = pgrad(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
                     },
                     "scale");
}

Value add_scalar(const Value& a, double s) {
  Array out = a.array();
  for (double& v : out.storage()) v += s;
  return make_result(std::move(out), {a}, [](Node& self) { pgrad(self, 0) += self.grad; }, "add_scalar");
}

Value matmul(const Value& a, const Value& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const Array& A = a.array();
  const Array& B = b.array();
  if (sa.size() == 2 && sb.size() == 2) {
    const std::size_t m = sa[0], k = sa[1], n = sb[1];
    if (sb[0] != k) shape_fail("matmul", sa, sb);
    Array out(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = &B[p * n];
        double* orow = &out[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
    return make_result(std::move(out), {a, b},
                       [m, k, n](Node& self) {
                         const Array& A = self.parents[0]->value;
                         const Array& B = self.parents[1]->value;
                         const Array& G = self.grad;
                         if (wants(self, 0)) {
                           Array& gA = pgrad(self, 0);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) {
                               double s = 0.0;
                               for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
                               gA[i * k + p] += s;
                             }
                         }
                         if (wants(self, 1)) {
                           Array& gB = pgrad(self, 1);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) {
                               const double aip = A[i * k + p];
                               for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += aip * G[i * n + j];
                             }
                         }
                       },
                       "matmul");
  }
  if (sa.size() == 2 && sb.size() == 1) {
    const std::size_t m = sa[0], k = sa[1];
    if (sb[0] != k) shape_fail("matmul", sa, sb);
    Array out(Shape{m});
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      const double* arow = &A[i * k];
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * B[p];
      out[i] = s;
    }
    return make_result(std::move(out), {a, b},
                       [m, k](Node& self) {
                         const Array& A = self.parents[0]->value;
                         const Array& x = self.parents[1]->value;
                         const Array& G = self.grad;
                         if (wants(self, 0)) {
                           Array& gA = pgrad(self, 0);
                           for (std::size_t i = 0; i < m; ++i) {
                             const double gi = G[i];
                             if (gi == 0.0) continue;
                             double* grow = &gA[i * k];
                             for (std::size_t p = 0; p < k; ++p) grow[p] += gi * x[p];
                           }
                         }
                         if (wants(self, 1)) {
                           Array& gx = pgrad(self, 1);
                           for (std::size_t i = 0; i < m; ++i) {
                             const double gi = G[i];
                             if (gi == 0.0) continue;
                             const double* arow = &A[i * k];
                             for (std::size_t p = 0; p < k; ++p) gx[p] += gi * arow[p];
                           }
                         }
                       },
                       "matmul");
  }
  if (sa.size() == 1 && sb.size() == 2) {
    const std::size_t k = sa[0], n = sb[1];
    if (sb[0] != k) shape_fail("matmul", sa, sb);
    Array out(Shape{n});
    for (std::size_t p = 0; p < k; ++p) {
      const double ap = A[p];
      for (std::size_t j = 0; j < n; ++j) out[j] += ap * B[p * n + j];
    }
    return make_result(std::move(out), {a, b},
                       [k, n](Node& self) {
                         const Array& v = self.parents[0]->value;
                         const Array& B = self.parents[1]->value;
                         const Array& G = self.grad;
                         if (wants(self, 0)) {
                           Array& gv = pgrad(self, 0);
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += G[j] * B[p * n + j];
                             gv[p] += s;
                           }
                         }
                         if (wants(self, 1)) {
                           Array& gB = pgrad(self, 1);
                           for (std::size_t p = 0; p < k; ++p)
                             for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += v[p] * G[j];
                         }
                       },
                       "matmul");
  }
  shape_fail("matmul", sa, sb);
}

Value affine(const Value& w, const Value& x, const Value& b) {
  const Shape& sw = w.shape();
  if (sw.size() != 2 || x.shape().size() != 1 || x.shape()[0] != sw[1]) shape_fail("affine", sw, x.shape());
  if (b.shape() != Shape{sw[0]}) shape_fail("affine", sw, b.shape());
  const std::size_t m = sw[0], k = sw[1];
  const Array& W = w.array();
  const Array& X = x.array();
  Array out = b.array();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* wrow = &W[i * k];
    for (std::size_t p = 0; p < k; ++p) s += wrow[p] * X[p];
    out[i] += s;
  }
  return make_result(std::move(out), {w, x, b},
                     [m, k](Node& self) {
                       const Array& W = self.parents[0]->value;
                       const Array& X = self.parents[1]->value;
                       const Array& G = self.grad;
                       if (wants(self, 0)) {
                         Array& gW = pgrad(self, 0);
                         for (std::size_t i = 0; i < m; ++i) {
                           const double gi = G[i];
                           if (gi == 0.0) continue;
                           double* grow = &gW[i * k];
                           for (std::size_t p = 0; p < k; ++p) grow[p] += gi * X[p];
                         }
                       }
                       if (wants(self, 1)) {
                         Array& gX = pgrad(self, 1);
                         for (std::size_t i = 0; i < m; ++i) {
                           const double gi = G[i];
                           if (gi == 0.0) continue;
                           const double* wrow = &W[i * k];
                           for (std::size_t p = 0; p < k; ++p) gX[p] += gi * wrow[p];
                         }
                       }
                       if (wants(self, 2)) pgrad(self, 2) += G;
                     },
                     "affine");
}

Value transpose(const Value& a) {
  if (a.shape().size() != 2) shape_fail("transpose", a.shape(), "is not rank 2");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Array out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.array()[i * c + j];
  return make_result(std::move(out), {a},
                     [r, c](Node& self) {
                       Array& g = pgrad(self, 0);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
                     },
                     "transpose");
}

Value reshape(const Value& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_fail("reshape", a.shape(), "cannot be viewed as " + shape_str(shape));
  Array out(std::move(shape), a.array().storage());
  return make_result(std::move(out), {a},
                     [](Node& self) {
                       Array& g = pgrad(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                     },
                     "reshape");
}

Value concat(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (first.empty()) shape_fail("concat", first, "is a scalar");
  std::size_t lead = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin() + 1, s.end(), first.begin() + 1)) {
      shape_fail("concat", first, s);
    }
    lead += s[0];
  }
  Shape out_shape = first;
  out_shape[0] = lead;
  std::vector<double> data;
  data.reserve(shape_size(out_shape));
  for (const auto& p : parts) data.insert(data.end(), p.array().storage().begin(), p.array().storage().end());
  return make_result(Array(std::move(out_shape), std::move(data)), parts,
                     [](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         const std::size_t n = self.parents[k]->value.size();
                         if (wants(self, k)) {
                           Array& g = pgrad(self, k);
                           for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
                         }
                         off += n;
                       }
                     },
                     "concat");
}

Value stack_cols(const std::vector<Value>& cols) {
  if (cols.empty()) throw ShapeError("stack_cols: no operands");
  const Shape& first = cols[0].shape();
  if (first.size() != 1) shape_fail("stack_cols", first, "is not rank 1");
  for (const auto& c : cols) {
    if (c.shape() != first) shape_fail("stack_cols", first, c.shape());
  }
  const std::size_t d = first[0], n = cols.size();
  Array out(Shape{d, n});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) out[i * n + j] = cols[j].array()[i];
  return make_result(std::move(out), cols,
                     [d, n](Node& self) {
                       for (std::size_t j = 0; j < n; ++j) {
                         if (!wants(self, j)) continue;
                         Array& g = pgrad(self, j);
                         for (std::size_t i = 0; i < d; ++i) g[i] += self.grad[i * n + j];
                       }
                     },
                     "stack_cols");
}

Value column(const Value& m, std::size_t j) {
  if (m.shape().size() != 2 || j >= m.shape()[1]) shape_fail("column", m.shape(), "has no column " + std::to_string(j));
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Array out(Shape{r});
  for (std::size_t i = 0; i < r; ++i) out[i] = m.array()[i * c + j];
  return make_result(std::move(out), {m},
                     [r, c, j](Node& self) {
                       Array& g = pgrad(self, 0);
                       for (std::size_t i = 0; i < r; ++i) g[i * c + j] += self.grad[i];
                     },
                     "column");
}

Value row(const Value& m, std::size_t i) {
  if (m.shape().size() != 2 || i >= m.shape()[0]) shape_fail("row", m.shape(), "has no row " + std::to_string(i));
  const std::size_t c = m.shape()[1];
  std::vector<double> data(m.array().storage().begin() + static_cast<std::ptrdiff_t>(i * c),
                           m.array().storage().begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
  return make_result(Array(Shape{c}, std::move(data)), {m},
                     [c, i](Node& self) {
                       Array& g = pgrad(self, 0);
                       for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j];
                     },
                     "row");
}

Value add_col(const Value& m, const Value& v) {
  if (m.shape().size() != 2 || v.shape() != Shape{m.shape()[0]}) shape_fail("add_col", m.shape(), v.shape());
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Array out = m.array();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += v.array()[i];
  return make_result(std::move(out), {m, v},
                     [r, c](Node& self) {
                       if (wants(self, 0)) pgrad(self, 0) += self.grad;
                       if (wants(self, 1)) {
                         Array& g = pgrad(self, 1);
                         for (std::size_t i = 0; i < r; ++i) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < c; ++j) s += self.grad[i * c + j];
                           g[i] += s;
                         }
                       }
                     },
                     "add_col");
}

Value tanh(const Value& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Value relu(const Value& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value sigmoid(const Value& a) {
  return unary(
      a, "sigmoid",
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Value exp(const Value& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(const Value& a) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a.array()[i] > 0.0)) {
      throw DomainError("log: nonpositive input " + std::to_string(a.array()[i]) + " at index " + std::to_string(i));
    }
  }
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value clamp(const Value& a, double lo, double hi) {
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

namespace {

void check_logits(const char* op, const Array& x, const Slices& sl) {
  for (std::size_t s = 0; s < sl.count; ++s) {
    bool any_finite = false;
    for (std::size_t i = 0; i < sl.length; ++i) {
      const double v = x[sl.at(s, i)];
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw DomainError(std::string(op) + ": non-finite input at index " + std::to_string(sl.at(s, i)));
      }
      any_finite = any_finite || std::isfinite(v);
    }
    if (!any_finite && sl.length > 0) throw DomainError(std::string(op) + ": every input in a slice is -inf");
  }
}

double slice_max(const Array& x, const Slices& sl, std::size_t s) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sl.length; ++i) m = std::max(m, x[sl.at(s, i)]);
  return m;
}

}  // namespace

Value softmax(const Value& a, std::size_t axis) {
  const Slices sl = slices_of("softmax", a.shape(), axis);
  const Array& x = a.array();
  check_logits("softmax", x, sl);
  Array out = Array::zeros_like(x);
  for (std::size_t s = 0; s < sl.count; ++s) {
    const double m = slice_max(x, sl, s);
    double z = 0.0;
    for (std::size_t i = 0; i < sl.length; ++i) z += (out[sl.at(s, i)] = std::exp(x[sl.at(s, i)] - m));
    for (std::size_t i = 0; i < sl.length; ++i) out[sl.at(s, i)] /= z;
  }
  return make_result(std::move(out), {a},
                     [sl](Node& self) {
                       const Array& y = self.value;
                       Array& g = pgrad(self, 0);
                       for (std::size_t s = 0; s < sl.count; ++s) {
                         double d = 0.0;
                         for (std::size_t i = 0; i < sl.length; ++i) d += self.grad[sl.at(s, i)] * y[sl.at(s, i)];
                         for (std::size_t i = 0; i < sl.length; ++i) {
                           const std::size_t k = sl.at(s, i);
                           g[k] += y[k] * (self.grad[k] - d);
                         }
                       }
                     },
                     "softmax");
}

Value log_softmax(const Value& a, std::size_t axis) {
  const Slices sl = slices_of("log_softmax", a.shape(), axis);
  const Array& x = a.array();
  check_logits("log_softmax", x, sl);
  Array out = Array::zeros_like(x);
  for (std::size_t s = 0; s < sl.count; ++s) {
    const double m = slice_max(x, sl, s);
    double z = 0.0;
    for (std::size_t i = 0; i < sl.length; ++i) z += std::exp(x[sl.at(s, i)] - m);
    const double lz = m + std::log(z);
    for (std::size_t i = 0; i < sl.length; ++i) out[sl.at(s, i)] = x[sl.at(s, i)] - lz;
  }
  return make_result(std::move(out), {a},
                     [sl](Node& self) {
                       const Array& y = self.value;
                       Array& g = pgrad(self, 0);
                       for (std::size_t s = 0; s < sl.count; ++s) {
                         double gs = 0.0;
                         for (std::size_t i = 0; i < sl.length; ++i) gs += self.grad[sl.at(s, i)];
                         for (std::size_t i = 0; i < sl.length; ++i) {
                           const std::size_t k = sl.at(s, i);
                           g[k] += self.grad[k] - std::exp(y[k]) * gs;
                         }
                       }
                     },
                     "log_softmax");
}

Value logsumexp(const Value& a, std::size_t axis) {
  const Slices sl = slices_of("logsumexp", a.shape(), axis);
  const Array& x = a.array();
  check_logits("logsumexp", x, sl);
  Array out(reduced_shape(a.shape(), axis));
  for (std::size_t s = 0; s < sl.count; ++s) {
    const double m = slice_max(x, sl, s);
    double z = 0.0;
    for (std::size_t i = 0; i < sl.length; ++i) z += std::exp(x[sl.at(s, i)] - m);
    out[s] = m + std::log(z);
  }
  return make_result(std::move(out), {a},
                     [sl](Node& self) {
                       const Array& x = self.parents[0]->value;
                       Array& g = pgrad(self, 0);
                       for (std::size_t s = 0; s < sl.count; ++s) {
                         for (std::size_t i = 0; i < sl.length; ++i) {
                           const std::size_t k = sl.at(s, i);
                           g[k] += self.grad[s] * std::exp(x[k] - self.value[s]);
                         }
                       }
                     },
                     "logsumexp");
}

Value sum(const Value& a, std::size_t axis) {
  const Slices sl = slices_of("sum", a.shape(), axis);
  Array out(reduced_shape(a.shape(), axis));
  for (std::size_t s = 0; s < sl.count; ++s)
    for (std::size_t i = 0; i < sl.length; ++i) out[s] += a.array()[sl.at(s, i)];
  return make_result(std::move(out), {a},
                     [sl](Node& self) {
                       Array& g = pgrad(self, 0);
                       for (std::size_t s = 0; s < sl.count; ++s)
                         for (std::size_t i = 0; i < sl.length; ++i) g[sl.at(s, i)] += self.grad[s];
                     },
                     "sum");
}

Value mean(const Value& a, std::size_t axis) {
  const Slices sl = slices_of("mean", a.shape(), axis);
  if (sl.length == 0) shape_fail("mean", a.shape(), "has an empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(sl.length));
}

Value sum_all(const Value& a) {
  double s = 0.0;
  for (double v : a.array().values()) s += v;
  return make_result(Array::scalar(s), {a},
                     [](Node& self) {
                       Array& g = pgrad(self, 0);
                       const double gs = self.grad[0];
                       for (double& v : g.storage()) v += gs;
                     },
                     "sum_all");
}

Value embedding(const Value& table, std::size_t id) {
  if (table.shape().size() != 2) shape_fail("embedding", table.shape(), "is not rank 2");
  if (id >= table.shape()[0]) {
    throw ShapeError("embedding: id " + std::to_string(id) + " out of range for table " + shape_str(table.shape()));
  }
  return row(table, id);
}

Value pick(const Value& a, std::size_t k) {
  if (a.shape().size() != 1 || k >= a.shape()[0]) shape_fail("pick", a.shape(), "has no element " + std::to_string(k));
  return make_result(Array::scalar(a.array()[k]), {a},
                     [k](Node& self) { pgrad(self, 0)[k] += self.grad[0]; }, "pick");
}

Value dot(const Value& a, const Value& b) {
  require_same("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.array()[i] * b.array()[i];
  return make_result(Array::scalar(s), {a, b},
                     [](Node& self) {
                       const double gs = self.grad[0];
                       const Array& x = self.parents[0]->value;
                       const Array& y = self.parents[1]->value;
                       if (wants(self, 0)) {
                         Array& g = pgrad(self, 0);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs * y[i];
                       }
                       if (wants(self, 1)) {
                         Array& g = pgrad(self, 1);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs * x[i];
                       }
                     },
                     "dot");
}

Value detach(const Value& a) { return constant(a.array()); }

Value gru_step(const Value& x, const Value& h, const Value& wx, const Value& wh, const Value& b) {
  if (x.shape().size() != 1 || h.shape().size() != 1) shape_fail("gru_step", x.shape(), h.shape());
  const std::size_t in = x.shape()[0], hid = h.shape()[0];
  if (wx.shape() != Shape{3 * hid, in}) shape_fail("gru_step", wx.shape(), x.shape());
  if (wh.shape() != Shape{3 * hid, hid}) shape_fail("gru_step", wh.shape(), h.shape());
  if (b.shape() != Shape{3 * hid}) shape_fail("gru_step", b.shape(), h.shape());

  const Array& X = x.array();
  const Array& H = h.array();
  const Array& Wx = wx.array();
  const Array& Wh = wh.array();
  // Saved activations: r, u, n, (Wh_n h).
  auto saved = std::make_shared<std::vector<double>>(4 * hid);
  std::vector<double>& sv = *saved;
  Array out(Shape{hid});
  std::vector<double> ax(3 * hid), ah(3 * hid);
  for (std::size_t i = 0; i < 3 * hid; ++i) {
    double s = 0.0;
    const double* wr = &Wx[i * in];
    for (std::size_t p = 0; p < in; ++p) s += wr[p] * X[p];
    ax[i] = s + b.array()[i];
    double t = 0.0;
    const double* hr = &Wh[i * hid];
    for (std::size_t p = 0; p < hid; ++p) t += hr[p] * H[p];
    ah[i] = t;
  }
  auto sig = [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  for (std::size_t k = 0; k < hid; ++k) {
    const double r = sig(ax[k] + ah[k]);
    const double u = sig(ax[hid + k] + ah[hid + k]);
    const double n = std::tanh(ax[2 * hid + k] + r * ah[2 * hid + k]);
    sv[k] = r;
    sv[hid + k] = u;
    sv[2 * hid + k] = n;
    sv[3 * hid + k] = ah[2 * hid + k];
    out[k] = (1.0 - u) * n + u * H[k];
  }
  return make_result(
      std::move(out), {x, h, wx, wh, b},
      [saved, in, hid](Node& self) {
        const std::vector<double>& sv = *saved;
        const Array& X = self.parents[0]->value;
        const Array& H = self.parents[1]->value;
        const Array& Wx = self.parents[2]->value;
        const Array& Wh = self.parents[3]->value;
        const Array& G = self.grad;
        // gx_pre: gradient wrt the input-side pre-activations (and bias);
        // gh_pre: gradient wrt Wh h.
        std::vector<double> gx_pre(3 * hid), gh_pre(3 * hid), gh_direct(hid);
        for (std::size_t k = 0; k < hid; ++k) {
          const double r = sv[k], u = sv[hid + k], n = sv[2 * hid + k], whn = sv[3 * hid + k];
          const double g = G[k];
          const double dn = g * (1.0 - u) * (1.0 - n * n);
          const double du = g * (H[k] - n) * u * (1.0 - u);
          const double dr = dn * whn * r * (1.0 - r);
          gx_pre[k] = dr;
          gx_pre[hid + k] = du;
          gx_pre[2 * hid + k] = dn;
          gh_pre[k] = dr;
          gh_pre[hid + k] = du;
          gh_pre[2 * hid + k] = dn * r;
          gh_direct[k] = g * u;
        }
        if (self.parents[0]->requires_grad) {
          Array& gX = self.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < 3 * hid; ++i) {
            const double gi = gx_pre[i];
            if (gi == 0.0) continue;
            const double* wr = &Wx[i * in];
            for (std::size_t p = 0; p < in; ++p) gX[p] += gi * wr[p];
          }
        }
        if (self.parents[1]->requires_grad) {
          Array& gH = self.parents[1]->grad_buffer();
          for (std::size_t k = 0; k < hid; ++k) gH[k] += gh_direct[k];
          for (std::size_t i = 0; i < 3 * hid; ++i) {
            const double gi = gh_pre[i];
            if (gi == 0.0) continue;
            const double* hr = &Wh[i * hid];
            for (std::size_t p = 0; p < hid; ++p) gH[p] += gi * hr[p];
          }
        }
        if (self.parents[2]->requires_grad) {
          Array& gW = self.parents[2]->grad_buffer();
          for (std::size_t i = 0; i < 3 * hid; ++i) {
            const double gi = gx_pre[i];
            if (gi == 0.0) continue;
            double* row = &gW[i * in];
            for (std::size_t p = 0; p < in; ++p) row[p] += gi * X[p];
          }
        }
        if (self.parents[3]->requires_grad) {
          Array& gW = self.parents[3]->grad_buffer();
          for (std::size_t i = 0; i < 3 * hid; ++i) {
            const double gi = gh_pre[i];
            if (gi == 0.0) continue;
            double* row = &gW[i * hid];
            for (std::size_t p = 0; p < hid; ++p) row[p] += gi * H[p];
          }
        }
        if (self.parents[4]->requires_grad) {
          Array& gb = self.parents[4]->grad_buffer();
          for (std::size_t i = 0; i < 3 * hid; ++i) gb[i] += gx_pre[i];
        }
      },
      "gru_step");
}

}  // namespace laln::nk
