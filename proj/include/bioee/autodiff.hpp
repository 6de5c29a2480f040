#pragma once

// Reverse-mode autodiff over dense 64-bit tensors. The op set is exactly what
// the model needs: dense linear algebra, segment ops for message passing, and
// a cross-entropy head. Values are row-major; a Tensor is a shared handle to
// a tape node, so graphs are built functionally and freed when the last
// handle drops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bioee/common.hpp"

namespace bioee::ad {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
  int64_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<Node>;

inline void check_finite(const Node& n) {
#ifndef NDEBUG
  for (double v : n.values)
    if (!std::isfinite(v)) fail("NonFinite", "tensor " + shape_str(n.shape) + " contains a non-finite value");
#else
  (void)n;
#endif
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : n_(std::move(n)) {}

  static Tensor constant(Shape shape, std::vector<double> values) {
    auto n = std::make_shared<Node>();
    if (int64_t(values.size()) != numel(shape))
      fail("ShapeMismatch", "value count " + std::to_string(values.size()) + " vs shape " + shape_str(shape));
    n->shape = std::move(shape);
    n->values = std::move(values);
    check_finite(*n);
    return Tensor(n);
  }

  static Tensor zeros(Shape shape) {
    return constant(std::move(shape), std::vector<double>(size_t(numel(shape)), 0.0));
  }

  static Tensor scalar(double v) { return constant({}, {v}); }

  static Tensor param(Shape shape, std::vector<double> values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.n_->requires_grad = true;
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t rows() const { return n_->rows(); }
  int64_t cols() const { return n_->cols(); }
  int64_t size() const { return int64_t(n_->values.size()); }
  bool requires_grad() const { return n_->requires_grad; }

  const std::vector<double>& values() const { return n_->values; }
  std::vector<double>& mutable_values() { return n_->values; }
  const std::vector<double>& grad() const { return n_->grad; }
  void clear_grad() { n_->grad.assign(n_->values.size(), 0.0); }

  double scalar_value() const {
    if (n_->values.size() != 1) fail("NotScalar", "tensor has shape " + shape_str(n_->shape));
    return n_->values[0];
  }

  double at(int64_t r, int64_t c) const { return n_->values[size_t(r * cols() + c)]; }

  NodePtr node() const { return n_; }

 private:
  NodePtr n_;
};

inline Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                      std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  for (const Tensor& t : inputs) {
    n->inputs.push_back(t.node());
    n->requires_grad = n->requires_grad || t.node()->requires_grad;
  }
  if (n->requires_grad) n->backward = std::move(backward);
  check_finite(*n);
  return Tensor(n);
}

// ---------------------------------------------------------------------------
// Ops

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    fail("ShapeMismatch", "matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(size_t(m * n), 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const double aip = av[size_t(i * k + p)];
      if (aip == 0.0) continue;
      for (int64_t j = 0; j < n; ++j) out[size_t(i * n + j)] += aip * bv[size_t(p * n + j)];
    }
  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    if (A.requires_grad) {
      A.ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          const double g = self.grad[size_t(i * n + j)];
          if (g == 0.0) continue;
          for (int64_t p = 0; p < k; ++p) A.grad[size_t(i * k + p)] += g * B.values[size_t(p * n + j)];
        }
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          const double av = A.values[size_t(i * k + p)];
          if (av == 0.0) continue;
          for (int64_t j = 0; j < n; ++j) B.grad[size_t(p * n + j)] += av * self.grad[size_t(i * n + j)];
        }
    }
  });
}

// Same-shape addition, or bias broadcast of a length-c vector over the rows
// of an r x c matrix.
inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
      for (int side = 0; side < 2; ++side) {
        Node& x = *self.inputs[size_t(side)];
        if (!x.requires_grad) continue;
        x.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i];
      }
    });
  }
  if (a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0]) {
    const int64_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(a.values());
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) out[size_t(i * c + j)] += b.values()[size_t(j)];
    return make_op(a.shape(), std::move(out), {a, b}, [r, c](Node& self) {
      Node& A = *self.inputs[0];
      Node& B = *self.inputs[1];
      if (A.requires_grad) {
        A.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
      }
      if (B.requires_grad) {
        B.ensure_grad();
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) B.grad[size_t(j)] += self.grad[size_t(i * c + j)];
      }
    });
  }
  fail("ShapeMismatch", "add " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail("ShapeMismatch", "mul " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  std::vector<double> out(a.values());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    if (A.requires_grad) {
      A.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i] * B.values[i];
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) B.grad[i] += self.grad[i] * A.values[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= c;
  return make_op(a.shape(), std::move(out), {a}, [c](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += c * self.grad[i];
  });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_op(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (A.values[i] > 0.0) A.grad[i] += self.grad[i];
  });
}

inline Tensor leaky_relu(const Tensor& a, double alpha) {
  std::vector<double> out(a.values());
  for (double& v : out) v = v > 0.0 ? v : alpha * v;
  return make_op(a.shape(), std::move(out), {a}, [alpha](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      A.grad[i] += (A.values[i] > 0.0 ? 1.0 : alpha) * self.grad[i];
  });
}

// Inverted dropout. p = 0 or disabled returns the input handle unchanged, so
// eval mode is the exact identity. The mask is a pure function of the seed.
inline Tensor dropout(const Tensor& a, double p, uint64_t seed, bool enabled = true) {
  if (!enabled || p == 0.0) return a;
  if (p < 0.0 || p >= 1.0) fail("ShapeMismatch", "dropout rate out of [0,1): " + std::to_string(p));
  Rng rng(mix64(seed));
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(a.values().size());
  for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  std::vector<double> out(a.values());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op(a.shape(), std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    Node& A = *self.inputs[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += mask[i] * self.grad[i];
  });
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0])
    fail("ShapeMismatch", "concat_cols " + shape_str(a.shape()) + " | " + shape_str(b.shape()));
  const int64_t r = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  std::vector<double> out(size_t(r * (ca + cb)));
  for (int64_t i = 0; i < r; ++i) {
    std::copy_n(a.values().begin() + i * ca, size_t(ca), out.begin() + i * (ca + cb));
    std::copy_n(b.values().begin() + i * cb, size_t(cb), out.begin() + i * (ca + cb) + ca);
  }
  return make_op({r, ca + cb}, std::move(out), {a, b}, [r, ca, cb](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    for (int64_t i = 0; i < r; ++i) {
      if (A.requires_grad) {
        A.ensure_grad();
        for (int64_t j = 0; j < ca; ++j) A.grad[size_t(i * ca + j)] += self.grad[size_t(i * (ca + cb) + j)];
      }
      if (B.requires_grad) {
        B.ensure_grad();
        for (int64_t j = 0; j < cb; ++j) B.grad[size_t(i * cb + j)] += self.grad[size_t(i * (ca + cb) + ca + j)];
      }
    }
  });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("ShapeMismatch", "concat_rows of zero tensors");
  const int64_t c = parts[0].cols();
  int64_t r = 0;
  for (const Tensor& t : parts) {
    if (t.shape().size() != 2 || t.shape()[1] != c)
      fail("ShapeMismatch", "concat_rows expects uniform columns, got " + shape_str(t.shape()));
    r += t.shape()[0];
  }
  std::vector<double> out;
  out.reserve(size_t(r * c));
  for (const Tensor& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
  std::vector<int64_t> row_counts;
  for (const Tensor& t : parts) row_counts.push_back(t.shape()[0]);
  return make_op({r, c}, std::move(out), parts, [row_counts, c](Node& self) {
    int64_t offset = 0;
    for (size_t k = 0; k < self.inputs.size(); ++k) {
      Node& X = *self.inputs[k];
      const int64_t nrow = row_counts[k];
      if (X.requires_grad) {
        X.ensure_grad();
        for (int64_t i = 0; i < nrow * c; ++i) X.grad[size_t(i)] += self.grad[size_t(offset * c + i)];
      }
      offset += nrow;
    }
  });
}

inline Tensor gather_rows(const Tensor& x, std::vector<int64_t> idx) {
  if (x.shape().size() != 2) fail("ShapeMismatch", "gather_rows expects a matrix, got " + shape_str(x.shape()));
  const int64_t n = x.shape()[0], c = x.shape()[1];
  for (int64_t i : idx)
    if (i < 0 || i >= n) fail("IndexOutOfRange", "row " + std::to_string(i) + " of " + std::to_string(n));
  const int64_t m = int64_t(idx.size());
  std::vector<double> out(size_t(m * c));
  for (int64_t i = 0; i < m; ++i)
    std::copy_n(x.values().begin() + idx[size_t(i)] * c, size_t(c), out.begin() + i * c);
  return make_op({m, c}, std::move(out), {x}, [idx = std::move(idx), c](Node& self) {
    Node& X = *self.inputs[0];
    if (!X.requires_grad) return;
    X.ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int64_t j = 0; j < c; ++j) X.grad[size_t(idx[i] * c + j)] += self.grad[i * size_t(c) + size_t(j)];
  });
}

// Sums rows of x into n_out buckets; segment ids must be sorted nondecreasing.
inline Tensor scatter_sum(const Tensor& x, std::vector<int64_t> segments, int64_t n_out) {
  if (x.shape().size() != 2) fail("ShapeMismatch", "scatter_sum expects a matrix, got " + shape_str(x.shape()));
  if (int64_t(segments.size()) != x.shape()[0])
    fail("ShapeMismatch", "scatter_sum segments " + std::to_string(segments.size()) + " vs rows " +
                              std::to_string(x.shape()[0]));
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i] < 0 || segments[i] >= n_out)
      fail("IndexOutOfRange", "segment " + std::to_string(segments[i]) + " of " + std::to_string(n_out));
    if (i > 0 && segments[i] < segments[i - 1]) fail("InvalidSegments", "segment ids must be nondecreasing");
  }
  const int64_t c = x.shape()[1];
  std::vector<double> out(size_t(n_out * c), 0.0);
  for (size_t i = 0; i < segments.size(); ++i)
    for (int64_t j = 0; j < c; ++j) out[size_t(segments[i] * c + j)] += x.values()[i * size_t(c) + size_t(j)];
  return make_op({n_out, c}, std::move(out), {x}, [segments = std::move(segments), c](Node& self) {
    Node& X = *self.inputs[0];
    if (!X.requires_grad) return;
    X.ensure_grad();
    for (size_t i = 0; i < segments.size(); ++i)
      for (int64_t j = 0; j < c; ++j) X.grad[i * size_t(c) + size_t(j)] += self.grad[size_t(segments[i] * c + j)];
  });
}

// Softmax within each run of equal segment ids. Accepts [n] or [n,1] logits.
inline Tensor segment_softmax(const Tensor& logits, std::vector<int64_t> segments) {
  const int64_t n = logits.shape().empty() ? 1 : logits.shape()[0];
  if (logits.size() != n)
    fail("ShapeMismatch", "segment_softmax expects [n] or [n,1] logits, got " + shape_str(logits.shape()));
  if (int64_t(segments.size()) != n)
    fail("ShapeMismatch", "segment_softmax segments " + std::to_string(segments.size()) + " vs logits " +
                              std::to_string(n));
  for (size_t i = 1; i < segments.size(); ++i)
    if (segments[i] < segments[i - 1]) fail("InvalidSegments", "segment ids must be nondecreasing");
  std::vector<double> out(static_cast<size_t>(n));
  const auto& lv = logits.values();
  size_t start = 0;
  while (start < size_t(n)) {
    size_t end = start;
    while (end < size_t(n) && segments[end] == segments[start]) ++end;
    double mx = lv[start];
    for (size_t i = start; i < end; ++i) mx = std::max(mx, lv[i]);
    double denom = 0.0;
    for (size_t i = start; i < end; ++i) denom += std::exp(lv[i] - mx);
    for (size_t i = start; i < end; ++i) out[i] = std::exp(lv[i] - mx) / denom;
    start = end;
  }
  return make_op(logits.shape(), std::move(out), {logits}, [segments = std::move(segments)](Node& self) {
    Node& L = *self.inputs[0];
    if (!L.requires_grad) return;
    L.ensure_grad();
    size_t start = 0;
    const size_t n = self.values.size();
    while (start < n) {
      size_t end = start;
      while (end < n && segments[end] == segments[start]) ++end;
      double dot = 0.0;
      for (size_t i = start; i < end; ++i) dot += self.grad[i] * self.values[i];
      for (size_t i = start; i < end; ++i) L.grad[i] += self.values[i] * (self.grad[i] - dot);
      start = end;
    }
  });
}

// Row i of x scaled by s[i]; s is [n] or [n,1].
inline Tensor scale_rows(const Tensor& x, const Tensor& s) {
  if (x.shape().size() != 2 || s.size() != x.shape()[0])
    fail("ShapeMismatch", "scale_rows " + shape_str(x.shape()) + " by " + shape_str(s.shape()));
  const int64_t n = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(x.values());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) out[size_t(i * c + j)] *= s.values()[size_t(i)];
  return make_op(x.shape(), std::move(out), {x, s}, [n, c](Node& self) {
    Node& X = *self.inputs[0];
    Node& S = *self.inputs[1];
    if (X.requires_grad) {
      X.ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) X.grad[size_t(i * c + j)] += S.values[size_t(i)] * self.grad[size_t(i * c + j)];
    }
    if (S.requires_grad) {
      S.ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < c; ++j) acc += self.grad[size_t(i * c + j)] * X.values[size_t(i * c + j)];
        S.grad[size_t(i)] += acc;
      }
    }
  });
}

// Per-row matrix-vector product: mats row r is a p x q matrix (row-major),
// vecs row r is a length-q vector, output row r = M_r v_r.
inline Tensor rows_matvec(const Tensor& mats, const Tensor& vecs, int64_t p, int64_t q) {
  if (mats.shape().size() != 2 || vecs.shape().size() != 2 || mats.shape()[0] != vecs.shape()[0] ||
      mats.shape()[1] != p * q || vecs.shape()[1] != q)
    fail("ShapeMismatch", "rows_matvec " + shape_str(mats.shape()) + " x " + shape_str(vecs.shape()) + " with p=" +
                              std::to_string(p) + " q=" + std::to_string(q));
  const int64_t n = mats.shape()[0];
  std::vector<double> out(size_t(n * p), 0.0);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t i = 0; i < p; ++i) {
      double acc = 0.0;
      for (int64_t j = 0; j < q; ++j)
        acc += mats.values()[size_t(r * p * q + i * q + j)] * vecs.values()[size_t(r * q + j)];
      out[size_t(r * p + i)] = acc;
    }
  return make_op({n, p}, std::move(out), {mats, vecs}, [n, p, q](Node& self) {
    Node& M = *self.inputs[0];
    Node& V = *self.inputs[1];
    for (int64_t r = 0; r < n; ++r)
      for (int64_t i = 0; i < p; ++i) {
        const double g = self.grad[size_t(r * p + i)];
        if (g == 0.0) continue;
        if (M.requires_grad) {
          M.ensure_grad();
          for (int64_t j = 0; j < q; ++j) M.grad[size_t(r * p * q + i * q + j)] += g * V.values[size_t(r * q + j)];
        }
        if (V.requires_grad) {
          V.ensure_grad();
          for (int64_t j = 0; j < q; ++j) V.grad[size_t(r * q + j)] += g * M.values[size_t(r * p * q + i * q + j)];
        }
      }
  });
}

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_op({}, {total}, {x}, [](Node& self) {
    Node& X = *self.inputs[0];
    if (!X.requires_grad) return;
    X.ensure_grad();
    for (double& g : X.grad) g += self.grad[0];
  });
}

// Mean negative log-likelihood over non-ignored rows. Optional per-class
// weights turn the mean into a weighted mean (sum w*nll / sum w).
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels, int64_t ignore_index = -1,
                            const std::vector<double>& class_weights = {}) {
  if (logits.shape().size() != 2 || int64_t(labels.size()) != logits.shape()[0])
    fail("ShapeMismatch",
         "cross_entropy logits " + shape_str(logits.shape()) + " vs " + std::to_string(labels.size()) + " labels");
  const int64_t n = logits.shape()[0], c = logits.shape()[1];
  if (!class_weights.empty() && int64_t(class_weights.size()) != c)
    fail("ShapeMismatch", "class weight count " + std::to_string(class_weights.size()) + " vs " + std::to_string(c));
  double weighted_nll = 0.0, weight_total = 0.0;
  const auto& lv = logits.values();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t y = labels[size_t(i)];
    if (y == ignore_index) continue;
    if (y < 0 || y >= c) fail("LabelOutOfRange", "label " + std::to_string(y) + " for " + std::to_string(c) + " classes");
    double mx = lv[size_t(i * c)];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, lv[size_t(i * c + j)]);
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) denom += std::exp(lv[size_t(i * c + j)] - mx);
    const double nll = std::log(denom) + mx - lv[size_t(i * c + y)];
    const double w = class_weights.empty() ? 1.0 : class_weights[size_t(y)];
    weighted_nll += w * nll;
    weight_total += w;
  }
  const double loss = weight_total > 0.0 ? weighted_nll / weight_total : 0.0;
  return make_op({}, {loss}, {logits},
                 [labels, ignore_index, class_weights, weight_total, n, c](Node& self) {
                   Node& L = *self.inputs[0];
                   if (!L.requires_grad || weight_total <= 0.0) return;
                   L.ensure_grad();
                   const double g = self.grad[0] / weight_total;
                   for (int64_t i = 0; i < n; ++i) {
                     const int64_t y = labels[size_t(i)];
                     if (y == ignore_index) continue;
                     const double w = class_weights.empty() ? 1.0 : class_weights[size_t(y)];
                     double mx = L.values[size_t(i * c)];
                     for (int64_t j = 1; j < c; ++j) mx = std::max(mx, L.values[size_t(i * c + j)]);
                     double denom = 0.0;
                     for (int64_t j = 0; j < c; ++j) denom += std::exp(L.values[size_t(i * c + j)] - mx);
                     for (int64_t j = 0; j < c; ++j) {
                       const double p = std::exp(L.values[size_t(i * c + j)] - mx) / denom;
                       L.grad[size_t(i * c + j)] += g * w * (p - (j == y ? 1.0 : 0.0));
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Backward pass

inline void backward(const Tensor& loss) {
  if (loss.size() != 1) fail("NotScalar", "backward needs a scalar loss, got " + shape_str(loss.shape()));
  NodePtr root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order topological sort over grad-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    Node* node = stack.back().first;
    size_t child_index = stack.back().second;
    if (child_index < node->inputs.size()) {
      stack.back().second = child_index + 1;
      Node* child = node->inputs[child_index].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    node->ensure_grad();
    if (node->backward) node->backward(*node);
  }
}

}  // namespace bioee::ad
