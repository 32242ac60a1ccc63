#include "nfcast/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "nfcast/error.hpp"

namespace nfcast::ad {
namespace {

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorKind::ShapeMismatch, op + ": " + a.str() + " vs " + b.str());
}

void require_matrix(const std::string& op, const Tensor& t) {
  if (t.shape().rank != 2) throw Error(ErrorKind::ShapeMismatch, op + " expects a matrix, got " + t.shape().str());
}

// C += op(A) * op(B), op(A) is m x k and op(B) is k x n.
void gemm_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n, bool ta,
              bool tb) {
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      double* c = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double a = A[i * k + p];
        if (a == 0.0) continue;
        const double* b = B + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
      }
    }
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* b = B + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double a = A[p * m + i];
        if (a == 0.0) continue;
        double* c = C + i * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
      }
    }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* a = A + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* b = B + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p];
        C[i * n + j] += s;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += A[p * m + i] * B[j * k + p];
        C[i * n + j] += s;
      }
    }
  }
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_kind(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (b.numel() == 1 && b.shape().rank <= 1) return Broadcast::Scalar;
  const bool row_vector = b.shape().rank == 1 || (b.shape().rank == 2 && b.shape()[0] == 1);
  if (a.shape().rank == 2 && row_vector && b.numel() == a.cols()) return Broadcast::Row;
  shape_error(op, a.shape(), b.shape());
}

// Index of b's element paired with a's element i.
inline std::size_t bidx(Broadcast k, std::size_t i, std::size_t cols) {
  switch (k) {
    case Broadcast::Same: return i;
    case Broadcast::Row: return i % cols;
    case Broadcast::Scalar: return 0;
  }
  return i;
}

template <class F, class D>
Tensor unary(const Tensor& a, F f, D dfdx_from_xy) {
  std::vector<double> out(a.numel());
  const auto x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result(a.shape(), std::move(out), {a}, [dfdx_from_xy](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx_from_xy(p.value[i], self.value[i]);
  });
}

}  // namespace

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < rank; ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(shape, 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  return from(shape, std::vector<double>(shape.numel(), fill), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.numel()) {
    throw Error(ErrorKind::ShapeMismatch,
                "shape " + shape.str() + " needs " + std::to_string(shape.numel()) + " values, got " +
                    std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from(Shape::scalar(), {v}, requires_grad); }

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  return from(Shape::mat(m.rows, m.cols), m.data, requires_grad);
}

std::size_t Tensor::rows() const noexcept {
  const auto& s = shape();
  if (s.rank == 2) return s[0];
  if (s.rank == 3) return s[0] * s[1];
  return 1;
}

std::size_t Tensor::cols() const noexcept {
  const auto& s = shape();
  if (s.rank == 0) return 1;
  return s[s.rank - 1];
}

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorKind::NotScalar, "item() on " + shape().str());
  return node_->value[0];
}

Matrix Tensor::to_matrix() const {
  Matrix m(rows(), cols());
  m.data = node_->value;
  return m;
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  const bool needs = std::any_of(parents.begin(), parents.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n, false, false);
  return make_result(Shape::mat(m, n), std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& A = *self.parents[0];
    Node& B = *self.parents[1];
    if (A.requires_grad) gemm_acc(self.grad.data(), B.value.data(), A.ensure_grad().data(), m, n, k, false, true);
    if (B.requires_grad) gemm_acc(A.value.data(), self.grad.data(), B.ensure_grad().data(), k, m, n, true, false);
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  const auto x = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return make_result(Shape::mat(c, r), std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape.numel() != a.numel()) shape_error("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(shape, std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("add", a, b);
  const std::size_t cols = a.cols();
  std::vector<double> out(a.numel());
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[bidx(kind, i, cols)];
  return make_result(a.shape(), std::move(out), {a, b}, [kind, cols](Node& self) {
    Node& A = *self.parents[0];
    Node& B = *self.parents[1];
    if (A.requires_grad) {
      auto& g = A.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (B.requires_grad) {
      auto& g = B.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bidx(kind, i, cols)] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("mul", a, b);
  const std::size_t cols = a.cols();
  std::vector<double> out(a.numel());
  const auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[bidx(kind, i, cols)];
  return make_result(a.shape(), std::move(out), {a, b}, [kind, cols](Node& self) {
    Node& A = *self.parents[0];
    Node& B = *self.parents[1];
    if (A.requires_grad) {
      auto& g = A.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * B.value[bidx(kind, i, cols)];
    }
    if (B.requires_grad) {
      auto& g = B.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bidx(kind, i, cols)] += self.grad[i] * A.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat of nothing");
  const Shape base = parts.front().shape();
  if (axis >= base.rank) throw Error(ErrorKind::ShapeMismatch, "concat axis beyond rank " + base.str());
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
  for (std::size_t i = axis + 1; i < base.rank; ++i) inner *= base[i];
  std::vector<std::size_t> widths;  // extent along axis times inner, per part
  Shape out_shape = base;
  out_shape.dims[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.rank == base.rank;
    for (std::size_t i = 0; ok && i < s.rank; ++i) ok = (i == axis) || s[i] == base[i];
    if (!ok) shape_error("concat", base, s);
    out_shape.dims[axis] += s[axis];
    widths.push_back(s[axis] * inner);
  }
  std::size_t total = 0;
  for (auto w : widths) total += w;
  std::vector<double> out(outer * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(o * total + offset));
    offset += widths[k];
  }
  return make_result(out_shape, std::move(out), parts, [widths, outer, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < widths[k]; ++j) g[o * widths[k] + j] += self.grad[o * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor row_gather(const Tensor& a, std::span<const std::uint32_t> rows) {
  require_matrix("row_gather", a);
  const std::size_t n_rows = a.shape()[0], cols = a.shape()[1];
  std::vector<double> out(rows.size() * cols);
  const auto x = a.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n_rows) {
      throw Error(ErrorKind::IndexOutOfBounds,
                  "row_gather index " + std::to_string(rows[i]) + " of " + std::to_string(n_rows));
    }
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return make_result(Shape::mat(rows.size(), cols), std::move(out), {a}, [idx = std::move(idx), cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) g[idx[i] * cols + j] += self.grad[i * cols + j];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_matrix("slice_cols", a);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (start + count > c) {
    throw Error(ErrorKind::IndexOutOfBounds, "slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) +
                                                 ") of " + std::to_string(c));
  }
  std::vector<double> out(r * count);
  const auto x = a.values();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * c + start), count,
                out.begin() + static_cast<std::ptrdiff_t>(i * count));
  return make_result(Shape::mat(r, count), std::move(out), {a}, [r, c, start, count](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * c + start + j] += self.grad[i * count + j];
  });
}

Tensor segment_mean(const Tensor& values, std::span<const std::uint32_t> segment_ids, std::size_t n_segments) {
  require_matrix("segment_mean", values);
  const std::size_t n = values.shape()[0], cols = values.shape()[1];
  if (segment_ids.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, "segment_mean: " + std::to_string(segment_ids.size()) + " ids for " +
                                              std::to_string(n) + " rows");
  }
  std::vector<double> counts(n_segments, 0.0);
  for (auto s : segment_ids) {
    if (s >= n_segments) {
      throw Error(ErrorKind::IndexOutOfBounds,
                  "segment id " + std::to_string(s) + " of " + std::to_string(n_segments));
    }
    counts[s] += 1.0;
  }
  std::vector<double> out(n_segments * cols, 0.0);
  const auto x = values.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[segment_ids[i] * cols + j] += x[i * cols + j];
  for (std::size_t s = 0; s < n_segments; ++s)
    if (counts[s] > 0)
      for (std::size_t j = 0; j < cols; ++j) out[s * cols + j] /= counts[s];
  std::vector<std::uint32_t> ids(segment_ids.begin(), segment_ids.end());
  return make_result(Shape::mat(n_segments, cols), std::move(out), {values},
                     [ids = std::move(ids), counts = std::move(counts), cols](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.ensure_grad();
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         const double inv = 1.0 / counts[ids[i]];
                         for (std::size_t j = 0; j < cols; ++j) g[i * cols + j] += self.grad[ids[i] * cols + j] * inv;
                       }
                     });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor dropout(const Tensor& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw Error(ErrorKind::InvalidArgument, "dropout probability must be below 1");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(a.numel());
  for (auto& m : mask) m = rng.bernoulli(p) ? 0.0 : keep_scale;
  return mul(a, Tensor::from(a.shape(), std::move(mask)));
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return make_result(Shape::scalar(), {s}, {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw Error(ErrorKind::ShapeMismatch, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (!(pred.shape() == target.shape())) shape_error("mse_loss", pred.shape(), target.shape());
  if (pred.numel() == 0) throw Error(ErrorKind::ShapeMismatch, "mse_loss of empty tensors");
  const auto x = pred.values(), y = target.values();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return make_result(Shape::scalar(), {s / n}, {pred, target}, [n](Node& self) {
    Node& P = *self.parents[0];
    Node& T = *self.parents[1];
    const double c = 2.0 * self.grad[0] / n;
    if (P.requires_grad) {
      auto& g = P.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * (P.value[i] - T.value[i]);
    }
    if (T.requires_grad) {
      auto& g = T.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c * (P.value[i] - T.value[i]);
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (!(logits.shape() == targets.shape())) shape_error("bce_with_logits", logits.shape(), targets.shape());
  if (logits.numel() == 0) throw Error(ErrorKind::ShapeMismatch, "bce_with_logits of empty tensors");
  const auto x = logits.values(), t = targets.values();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::max(x[i], 0.0) - x[i] * t[i] + std::log1p(std::exp(-std::abs(x[i])));
  return make_result(Shape::scalar(), {s / n}, {logits, targets}, [n](Node& self) {
    Node& X = *self.parents[0];
    Node& T = *self.parents[1];
    const double c = self.grad[0] / n;
    if (X.requires_grad) {
      auto& g = X.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-X.value[i]));
        g[i] += c * (sig - T.value[i]);
      }
    }
    if (T.requires_grad) {
      auto& g = T.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c * X.value[i];
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> class_ids) {
  require_matrix("softmax_cross_entropy", logits);
  const std::size_t r = logits.shape()[0], c = logits.shape()[1];
  if (class_ids.size() != r) {
    throw Error(ErrorKind::ShapeMismatch,
                "softmax_cross_entropy: " + std::to_string(class_ids.size()) + " targets for " + std::to_string(r) + " rows");
  }
  if (r == 0) throw Error(ErrorKind::ShapeMismatch, "softmax_cross_entropy of zero rows");
  std::vector<double> probs(r * c);
  const auto x = logits.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (class_ids[i] >= c) {
      throw Error(ErrorKind::IndexOutOfBounds, "class " + std::to_string(class_ids[i]) + " of " + std::to_string(c));
    }
    const double* row = x.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - mx) / z;
    loss += std::log(z) + mx - row[class_ids[i]];
  }
  std::vector<std::uint32_t> ids(class_ids.begin(), class_ids.end());
  return make_result(Shape::scalar(), {loss / static_cast<double>(r)}, {logits},
                     [probs = std::move(probs), ids = std::move(ids), r, c](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.ensure_grad();
                       const double k = self.grad[0] / static_cast<double>(r);
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += k * probs[i * c + j];
                         g[i * c + ids[i]] -= k;
                       }
                     });
}

Tensor moving_average(const Tensor& seq, std::size_t kernel) {
  require_matrix("moving_average", seq);
  const std::size_t L = seq.shape()[0], C = seq.shape()[1];
  if (kernel == 0 || kernel % 2 == 0) throw Error(ErrorKind::InvalidArgument, "moving_average kernel must be odd");
  if (kernel > L) {
    throw Error(ErrorKind::KernelTooLarge, "kernel " + std::to_string(kernel) + " exceeds length " + std::to_string(L));
  }
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto last = static_cast<std::ptrdiff_t>(L) - 1;
  const double inv = 1.0 / static_cast<double>(kernel);
  std::vector<double> out(L * C, 0.0);
  const auto x = seq.values();
  for (std::ptrdiff_t t = 0; t <= last; ++t)
    for (std::ptrdiff_t d = -half; d <= half; ++d) {
      const auto src = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t + d, 0, last));
      for (std::size_t j = 0; j < C; ++j) out[static_cast<std::size_t>(t) * C + j] += x[src * C + j];
    }
  for (auto& v : out) v /= static_cast<double>(kernel);
  return make_result(Shape::mat(L, C), std::move(out), {seq}, [half, last, C, inv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::ptrdiff_t t = 0; t <= last; ++t)
      for (std::ptrdiff_t d = -half; d <= half; ++d) {
        const auto src = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t + d, 0, last));
        for (std::size_t j = 0; j < C; ++j) g[src * C + j] += self.grad[static_cast<std::size_t>(t) * C + j] * inv;
      }
  });
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw Error(ErrorKind::NotScalar, "backward on " + loss.shape().str());
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    if (!n->backward) continue;
    n->backward = nullptr;
    n->parents.clear();
  }
}

}  // namespace nfcast::ad
