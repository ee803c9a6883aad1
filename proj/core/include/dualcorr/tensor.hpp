#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualcorr::num {

// Extents of a dense row-major array. Rank 0 (empty shape) is a scalar
// holding exactly one value.
using Shape = std::vector<int>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

// Value-semantics handle onto one node of the recorded op graph. Every op
// below computes its result eagerly and, when any input participates in
// gradient computation, records how to push gradients back to its inputs.
// backward() replays the record in reverse creation order, so each recorded
// op is visited exactly once.
//
// All storage is 64-bit floating point.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t size() const;
  bool requires_grad() const;

  std::span<const double> values() const;
  // Direct write access to a leaf's storage (optimizer updates, data
  // loading). Must not be called on a tensor produced by an op.
  std::span<double> mutable_values();

  // Scalar accessor; throws unless size() == 1.
  double value() const;

  // Gradient buffer. Empty span until a backward pass has touched this node.
  std::span<const double> grad() const;
  void zero_grad();

  explicit Tensor(std::shared_ptr<detail::Node> node);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Elementwise; shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

// Rank-2 only.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Softmax along `axis`, computed with max subtraction. Slices along the
// axis sum to 1.
Tensor softmax(const Tensor& x, int axis);
// log(sum(exp(x))) along `axis`; the axis is removed from the output shape.
Tensor logsumexp(const Tensor& x, int axis);
// Divide each slice along `axis` by its Euclidean norm. A zero slice maps
// to zeros and receives zero gradient.
Tensor l2_normalize(const Tensor& x, int axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum along one axis; the axis is removed from the output shape.
Tensor sum_axis(const Tensor& x, int axis);

// Cosine similarity of two rank-1 tensors of equal length; 0 when either
// vector is zero (with zero gradient).
Tensor cosine(const Tensor& u, const Tensor& v);
// Row-by-row cosine of two N x D tensors -> rank-1 N.
Tensor rowwise_cosine(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape new_shape);
// Element of a rank-1 tensor -> scalar.
Tensor at(const Tensor& x, int index);
// Rows of a rank-2 tensor in the given order; duplicate indices accumulate
// gradient.
Tensor gather_rows(const Tensor& x, std::vector<int> rows);
// One output row per group: the mean of the selected input rows. Groups
// must be non-empty.
Tensor pool_rows(const Tensor& x, std::vector<std::vector<int>> groups);
// Columns [col_begin, col_end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, int col_begin, int col_end);
// N x D plus a rank-1 D row vector added to every row.
Tensor add_row_broadcast(const Tensor& x, const Tensor& row);
// (P*S) x D tensor whose row p*S+s is a_p + b_s. Pairs every row of `a`
// with every row of `b`.
Tensor pairwise_sum_rows(const Tensor& a, const Tensor& b);

// Indices of the k largest values, sorted by descending value and, among
// equal values, by ascending index. 1 <= k <= n.
std::vector<int> topk(std::span<const double> scores, int k);
std::vector<int> topk(const Tensor& scores, int k);

// Reverse pass from a scalar loss: accumulates d(loss)/d(leaf) into the
// grad buffer of every reachable tensor with requires_grad set. Gradients
// accumulate across calls; clear leaves with zero_grad() between passes.
void backward(const Tensor& loss);

}  // namespace dualcorr::num
