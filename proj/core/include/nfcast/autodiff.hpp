#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nfcast/matrix.hpp"
#include "nfcast/rng.hpp"

// Dense 64-bit tensors with a reverse-mode tape. Every op allocates a fresh
// output node; nodes produced from inputs that require gradients keep their
// parents and a backward closure until backward() runs.
namespace nfcast::ad {

struct Shape {
  std::array<std::size_t, 3> dims{};
  std::size_t rank = 0;

  static Shape scalar() { return {}; }
  static Shape vec(std::size_t n) { return {{n, 0, 0}, 1}; }
  static Shape mat(std::size_t r, std::size_t c) { return {{r, c, 0}, 2}; }
  static Shape cube(std::size_t a, std::size_t b, std::size_t c) { return {{a, b, c}, 3}; }

  std::size_t numel() const noexcept {
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) n *= dims[i];
    return n;
  }
  std::size_t operator[](std::size_t axis) const noexcept { return dims[axis]; }
  bool operator==(const Shape& o) const noexcept { return rank == o.rank && dims == o.dims; }
  std::string str() const;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const noexcept { return node_->shape; }
  std::size_t numel() const noexcept { return node_->value.size(); }
  /// Matrix view: rank-2 tensors as is, vectors as one row, scalars as 1x1.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<const double> values() const noexcept { return node_->value; }
  /// In-place access for optimizers and perturbation checks on leaf tensors.
  std::span<double> mutable_values() noexcept { return node_->value; }
  double item() const;
  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  Matrix to_matrix() const;

  bool requires_grad() const noexcept { return node_->requires_grad; }
  bool has_grad() const noexcept { return !node_->grad.empty(); }
  /// Accumulated gradient; zeros when nothing has been accumulated.
  std::vector<double> grad() const;
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() noexcept { node_->grad.clear(); }

  /// Copy of the values with no tape attachment.
  Tensor detach() const;

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, std::function<void(Node&)>);

  std::shared_ptr<Node> node_;
};

/// Builds an op output. Parents and the closure are kept only if a parent
/// requires gradients.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Same values under a new shape with an equal element count.
Tensor reshape(const Tensor& a, Shape shape);
/// Same shape, a row vector broadcast over the rows of a, or a scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product with the same broadcasting rules as add.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor row_gather(const Tensor& a, std::span<const std::uint32_t> rows);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
/// Mean of the rows of `values` sharing a segment id; empty segments give zeros.
Tensor segment_mean(const Tensor& values, std::span<const std::uint32_t> segment_ids, std::size_t n_segments);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
/// Inverted dropout; p == 0 returns the input unchanged.
Tensor dropout(const Tensor& a, double p, Rng& rng);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);
/// Mean over rows of -log softmax(logits)[row, class_ids[row]].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> class_ids);
/// Centered moving average along the time axis (rows) with edge replication.
/// kernel must be odd and no larger than the sequence length.
Tensor moving_average(const Tensor& seq, std::size_t kernel);

/// Populates gradients for every tensor reachable from `loss` that requires
/// them, then releases the tape. Leaf gradients accumulate across calls.
/// Throws Error(NotScalar) unless loss has exactly one element.
void backward(const Tensor& loss);

}  // namespace nfcast::ad
