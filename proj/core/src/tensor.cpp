#include "dualcorr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace dualcorr::num {

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

namespace {

std::atomic<std::uint64_t> g_seq{1};

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> values,
                                bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

}  // namespace
}  // namespace detail

using detail::Node;

namespace {

using NodePtr = std::shared_ptr<Node>;

const NodePtr& impl(const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("tensor is empty");
  return t.node();
}

// Wires up a new op node: output requires grad iff any input does, and only
// then are the inputs retained and the backprop callback installed.
Tensor make_op(Shape shape, std::vector<double> values,
               std::initializer_list<NodePtr> parents,
               std::function<void(Node&)> backprop) {
  bool needs = false;
  for (const auto& p : parents) needs |= p->requires_grad;
  auto n = detail::make_node(std::move(shape), std::move(values), needs);
  if (needs) {
    n->parents.assign(parents.begin(), parents.end());
    n->backprop = std::move(backprop);
  }
  return Tensor(n);
}

void check_same_shape(const char* op, const Node& a, const Node& b) {
  if (a.shape != b.shape) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch, " +
                                shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
  }
}

void check_axis(const char* op, const Node& x, int axis) {
  if (axis < 0 || axis >= static_cast<int>(x.shape.size())) {
    throw std::invalid_argument(std::string(op) + ": axis " +
                                std::to_string(axis) + " out of range for " +
                                shape_str(x.shape));
  }
}

// Decomposition of a row-major array around one axis: the array is
// outer x n x inner, and a slice along the axis starts at
// (o * n * inner + i) with stride inner.
struct AxisView {
  std::int64_t outer = 1;
  std::int64_t n = 1;
  std::int64_t inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

void check_rank2(const char* op, const Node& x) {
  if (x.shape.size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected rank-2, got " +
                                shape_str(x.shape));
  }
}

}  // namespace

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(detail::make_node(std::move(shape),
                                  std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(detail::make_node(
      std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_size(shape) != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("from_values: " + shape_str(shape) +
                                " does not hold " +
                                std::to_string(values.size()) + " values");
  }
  return Tensor(
      detail::make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(detail::make_node(Shape{}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return impl(*this)->shape; }
int Tensor::rank() const { return static_cast<int>(shape().size()); }
std::int64_t Tensor::size() const {
  return static_cast<std::int64_t>(impl(*this)->values.size());
}
bool Tensor::requires_grad() const { return impl(*this)->requires_grad; }

std::span<const double> Tensor::values() const {
  const auto& n = impl(*this);
  return {n->values.data(), n->values.size()};
}

std::span<double> Tensor::mutable_values() {
  const auto& n = impl(*this);
  if (n->backprop) {
    throw std::logic_error("mutable_values: not a leaf tensor");
  }
  return {n->values.data(), n->values.size()};
}

double Tensor::value() const {
  const auto& n = impl(*this);
  if (n->values.size() != 1) {
    throw std::invalid_argument("value(): tensor is " + shape_str(n->shape) +
                                ", not a scalar");
  }
  return n->values[0];
}

std::span<const double> Tensor::grad() const {
  const auto& n = impl(*this);
  return {n->grad.data(), n->grad.size()};
}

void Tensor::zero_grad() {
  auto& n = impl(*this);
  n->grad.assign(n->values.size(), 0.0);
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const auto& pa = impl(a);
  const auto& pb = impl(b);
  check_same_shape("add", *pa, *pb);
  std::vector<double> out(pa->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = pa->values[i] + pb->values[i];
  }
  return make_op(pa->shape, std::move(out), {pa, pb}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        p->grad[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto& pa = impl(a);
  const auto& pb = impl(b);
  check_same_shape("sub", *pa, *pb);
  std::vector<double> out(pa->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = pa->values[i] - pb->values[i];
  }
  return make_op(pa->shape, std::move(out), {pa, pb}, [](Node& self) {
    auto& a_ = *self.parents[0];
    auto& b_ = *self.parents[1];
    if (a_.requires_grad) {
      a_.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        a_.grad[i] += self.grad[i];
      }
    }
    if (b_.requires_grad) {
      b_.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        b_.grad[i] -= self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto& pa = impl(a);
  const auto& pb = impl(b);
  check_same_shape("mul", *pa, *pb);
  std::vector<double> out(pa->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = pa->values[i] * pb->values[i];
  }
  return make_op(pa->shape, std::move(out), {pa, pb}, [](Node& self) {
    auto& a_ = *self.parents[0];
    auto& b_ = *self.parents[1];
    if (a_.requires_grad) {
      a_.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        a_.grad[i] += self.grad[i] * b_.values[i];
      }
    }
    if (b_.requires_grad) {
      b_.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        b_.grad[i] += self.grad[i] * a_.values[i];
      }
    }
  });
}

Tensor add_scalar(const Tensor& x, double c) {
  const auto& px = impl(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px->values[i] + c;
  return make_op(px->shape, std::move(out), {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i];
    }
  });
}

Tensor mul_scalar(const Tensor& x, double c) {
  const auto& px = impl(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px->values[i] * c;
  return make_op(px->shape, std::move(out), {px}, [c](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * c;
    }
  });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

Tensor tanh(const Tensor& x) {
  const auto& px = impl(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::tanh(px->values[i]);
  }
  return make_op(px->shape, std::move(out), {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * (1.0 - self.values[i] * self.values[i]);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto& px = impl(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = px->values[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_op(px->shape, std::move(out), {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * self.values[i] * (1.0 - self.values[i]);
    }
  });
}

Tensor exp(const Tensor& x) {
  const auto& px = impl(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(px->values[i]);
  }
  return make_op(px->shape, std::move(out), {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * self.values[i];
    }
  });
}

Tensor log(const Tensor& x) {
  const auto& px = impl(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::log(px->values[i]);
  }
  return make_op(px->shape, std::move(out), {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] / p.values[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& pa = impl(a);
  const auto& pb = impl(b);
  check_rank2("matmul", *pa);
  check_rank2("matmul", *pb);
  if (pa->shape[1] != pb->shape[0]) {
    throw std::invalid_argument("matmul: inner extents differ, " +
                                shape_str(pa->shape) + " vs " +
                                shape_str(pb->shape));
  }
  const int m = pa->shape[0], k = pa->shape[1], n = pb->shape[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = pa->values[i * k + l];
      if (av == 0.0) continue;
      const double* brow = &pb->values[static_cast<std::size_t>(l) * n];
      double* orow = &out[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_op({m, n}, std::move(out), {pa, pb}, [m, k, n](Node& self) {
    auto& a_ = *self.parents[0];
    auto& b_ = *self.parents[1];
    if (a_.requires_grad) {
      a_.ensure_grad();
      // dA = G * B^T
      for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
          double acc = 0.0;
          const double* grow = &self.grad[static_cast<std::size_t>(i) * n];
          const double* brow = &b_.values[static_cast<std::size_t>(l) * n];
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          a_.grad[i * k + l] += acc;
        }
      }
    }
    if (b_.requires_grad) {
      b_.ensure_grad();
      // dB = A^T * G
      for (int i = 0; i < m; ++i) {
        const double* grow = &self.grad[static_cast<std::size_t>(i) * n];
        for (int l = 0; l < k; ++l) {
          const double av = a_.values[i * k + l];
          if (av == 0.0) continue;
          double* brow = &b_.grad[static_cast<std::size_t>(l) * n];
          for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& x) {
  const auto& px = impl(x);
  check_rank2("transpose", *px);
  const int r = px->shape[0], c = px->shape[1];
  std::vector<double> out(px->values.size());
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out[j * r + i] = px->values[i * c + j];
  }
  return make_op({c, r}, std::move(out), {px}, [r, c](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
    }
  });
}

// ---------------------------------------------------------------------------
// Axis ops
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  const auto& px = impl(x);
  check_axis("softmax", *px, axis);
  const AxisView v = axis_view(px->shape, axis);
  std::vector<double> out(px->values.size());
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t in = 0; in < v.inner; ++in) {
      const std::int64_t base = o * v.n * v.inner + in;
      double mx = px->values[base];
      for (std::int64_t i = 1; i < v.n; ++i) {
        mx = std::max(mx, px->values[base + i * v.inner]);
      }
      double denom = 0.0;
      for (std::int64_t i = 0; i < v.n; ++i) {
        const double e = std::exp(px->values[base + i * v.inner] - mx);
        out[base + i * v.inner] = e;
        denom += e;
      }
      for (std::int64_t i = 0; i < v.n; ++i) out[base + i * v.inner] /= denom;
    }
  }
  return make_op(px->shape, std::move(out), {px}, [v](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t in = 0; in < v.inner; ++in) {
        const std::int64_t base = o * v.n * v.inner + in;
        double dot = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
          const std::int64_t idx = base + i * v.inner;
          dot += self.grad[idx] * self.values[idx];
        }
        for (std::int64_t i = 0; i < v.n; ++i) {
          const std::int64_t idx = base + i * v.inner;
          p.grad[idx] += self.values[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor logsumexp(const Tensor& x, int axis) {
  const auto& px = impl(x);
  check_axis("logsumexp", *px, axis);
  const AxisView v = axis_view(px->shape, axis);
  std::vector<double> out(static_cast<std::size_t>(v.outer * v.inner));
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t in = 0; in < v.inner; ++in) {
      const std::int64_t base = o * v.n * v.inner + in;
      double mx = px->values[base];
      for (std::int64_t i = 1; i < v.n; ++i) {
        mx = std::max(mx, px->values[base + i * v.inner]);
      }
      double acc = 0.0;
      for (std::int64_t i = 0; i < v.n; ++i) {
        acc += std::exp(px->values[base + i * v.inner] - mx);
      }
      out[o * v.inner + in] = mx + std::log(acc);
    }
  }
  return make_op(drop_axis(px->shape, axis), std::move(out), {px},
                 [v](Node& self) {
                   auto& p = *self.parents[0];
                   p.ensure_grad();
                   for (std::int64_t o = 0; o < v.outer; ++o) {
                     for (std::int64_t in = 0; in < v.inner; ++in) {
                       const std::int64_t base = o * v.n * v.inner + in;
                       const double lse = self.values[o * v.inner + in];
                       const double g = self.grad[o * v.inner + in];
                       for (std::int64_t i = 0; i < v.n; ++i) {
                         const std::int64_t idx = base + i * v.inner;
                         p.grad[idx] += g * std::exp(p.values[idx] - lse);
                       }
                     }
                   }
                 });
}

Tensor l2_normalize(const Tensor& x, int axis) {
  const auto& px = impl(x);
  check_axis("l2_normalize", *px, axis);
  const AxisView v = axis_view(px->shape, axis);
  std::vector<double> out(px->values.size(), 0.0);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t in = 0; in < v.inner; ++in) {
      const std::int64_t base = o * v.n * v.inner + in;
      double sq = 0.0;
      for (std::int64_t i = 0; i < v.n; ++i) {
        const double val = px->values[base + i * v.inner];
        sq += val * val;
      }
      if (sq == 0.0) continue;  // zero slice stays zero
      const double norm = std::sqrt(sq);
      for (std::int64_t i = 0; i < v.n; ++i) {
        out[base + i * v.inner] = px->values[base + i * v.inner] / norm;
      }
    }
  }
  return make_op(px->shape, std::move(out), {px}, [v](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t in = 0; in < v.inner; ++in) {
        const std::int64_t base = o * v.n * v.inner + in;
        double sq = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
          const double val = p.values[base + i * v.inner];
          sq += val * val;
        }
        if (sq == 0.0) continue;  // zero slice: zero gradient
        const double norm = std::sqrt(sq);
        double dot = 0.0;
        for (std::int64_t i = 0; i < v.n; ++i) {
          const std::int64_t idx = base + i * v.inner;
          dot += self.grad[idx] * self.values[idx];
        }
        for (std::int64_t i = 0; i < v.n; ++i) {
          const std::int64_t idx = base + i * v.inner;
          p.grad[idx] += (self.grad[idx] - self.values[idx] * dot) / norm;
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto& px = impl(x);
  double acc = 0.0;
  for (double v : px->values) acc += v;
  return make_op(Shape{}, {acc}, {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      p.grad[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  const auto& px = impl(x);
  const double n = static_cast<double>(px->values.size());
  double acc = 0.0;
  for (double v : px->values) acc += v;
  return make_op(Shape{}, {acc / n}, {px}, [n](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      p.grad[i] += self.grad[0] / n;
    }
  });
}

Tensor sum_axis(const Tensor& x, int axis) {
  const auto& px = impl(x);
  check_axis("sum_axis", *px, axis);
  const AxisView v = axis_view(px->shape, axis);
  std::vector<double> out(static_cast<std::size_t>(v.outer * v.inner), 0.0);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.n; ++i) {
      for (std::int64_t in = 0; in < v.inner; ++in) {
        out[o * v.inner + in] += px->values[o * v.n * v.inner + i * v.inner + in];
      }
    }
  }
  return make_op(drop_axis(px->shape, axis), std::move(out), {px},
                 [v](Node& self) {
                   auto& p = *self.parents[0];
                   p.ensure_grad();
                   for (std::int64_t o = 0; o < v.outer; ++o) {
                     for (std::int64_t i = 0; i < v.n; ++i) {
                       for (std::int64_t in = 0; in < v.inner; ++in) {
                         p.grad[o * v.n * v.inner + i * v.inner + in] +=
                             self.grad[o * v.inner + in];
                       }
                     }
                   }
                 });
}

// ---------------------------------------------------------------------------
// Cosine similarity
// ---------------------------------------------------------------------------

namespace {

// Shared kernel: cosine of two length-d slices plus gradient scatter.
double cosine_forward(const double* u, const double* v, std::int64_t d) {
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::int64_t i = 0; i < d; ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

void cosine_backward(const double* u, const double* v, std::int64_t d,
                     double c, double g, double* du, double* dv) {
  double uu = 0.0, vv = 0.0;
  for (std::int64_t i = 0; i < d; ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return;  // defined as 0 with zero gradient
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  for (std::int64_t i = 0; i < d; ++i) {
    if (du) du[i] += g * (v[i] / (nu * nv) - c * u[i] / uu);
    if (dv) dv[i] += g * (u[i] / (nu * nv) - c * v[i] / vv);
  }
}

}  // namespace

Tensor cosine(const Tensor& u, const Tensor& v) {
  const auto& pu = impl(u);
  const auto& pv = impl(v);
  if (pu->shape.size() != 1 || pv->shape.size() != 1 ||
      pu->shape != pv->shape) {
    throw std::invalid_argument("cosine: expected equal-length vectors, got " +
                                shape_str(pu->shape) + " vs " +
                                shape_str(pv->shape));
  }
  const std::int64_t d = pu->values.size();
  const double c = cosine_forward(pu->values.data(), pv->values.data(), d);
  return make_op(Shape{}, {c}, {pu, pv}, [d, c](Node& self) {
    auto& u_ = *self.parents[0];
    auto& v_ = *self.parents[1];
    if (u_.requires_grad) u_.ensure_grad();
    if (v_.requires_grad) v_.ensure_grad();
    cosine_backward(u_.values.data(), v_.values.data(), d, c, self.grad[0],
                    u_.requires_grad ? u_.grad.data() : nullptr,
                    v_.requires_grad ? v_.grad.data() : nullptr);
  });
}

Tensor rowwise_cosine(const Tensor& a, const Tensor& b) {
  const auto& pa = impl(a);
  const auto& pb = impl(b);
  check_rank2("rowwise_cosine", *pa);
  check_rank2("rowwise_cosine", *pb);
  if (pa->shape != pb->shape) {
    throw std::invalid_argument("rowwise_cosine: shape mismatch, " +
                                shape_str(pa->shape) + " vs " +
                                shape_str(pb->shape));
  }
  const int n = pa->shape[0];
  const std::int64_t d = pa->shape[1];
  std::vector<double> out(n);
  for (int r = 0; r < n; ++r) {
    out[r] =
        cosine_forward(&pa->values[r * d], &pb->values[r * d], d);
  }
  return make_op({n}, std::move(out), {pa, pb}, [n, d](Node& self) {
    auto& a_ = *self.parents[0];
    auto& b_ = *self.parents[1];
    if (a_.requires_grad) a_.ensure_grad();
    if (b_.requires_grad) b_.ensure_grad();
    for (int r = 0; r < n; ++r) {
      cosine_backward(&a_.values[r * d], &b_.values[r * d], d, self.values[r],
                      self.grad[r],
                      a_.requires_grad ? &a_.grad[r * d] : nullptr,
                      b_.requires_grad ? &b_.grad[r * d] : nullptr);
    }
  });
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
  const auto& px = impl(x);
  if (shape_size(new_shape) != static_cast<std::int64_t>(px->values.size())) {
    throw std::invalid_argument("reshape: " + shape_str(px->shape) +
                                " does not fit " + shape_str(new_shape));
  }
  return make_op(std::move(new_shape), px->values, {px}, [](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i];
    }
  });
}

Tensor at(const Tensor& x, int index) {
  const auto& px = impl(x);
  if (px->shape.size() != 1) {
    throw std::invalid_argument("at: expected rank-1, got " +
                                shape_str(px->shape));
  }
  if (index < 0 || index >= px->shape[0]) {
    throw std::out_of_range("at: index " + std::to_string(index) +
                            " out of range for " + shape_str(px->shape));
  }
  return make_op(Shape{}, {px->values[index]}, {px}, [index](Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    p.grad[index] += self.grad[0];
  });
}

Tensor gather_rows(const Tensor& x, std::vector<int> rows) {
  const auto& px = impl(x);
  check_rank2("gather_rows", *px);
  const int n = px->shape[0], d = px->shape[1];
  for (int r : rows) {
    if (r < 0 || r >= n) {
      throw std::out_of_range("gather_rows: row " + std::to_string(r) +
                              " out of range for " + shape_str(px->shape));
    }
  }
  const int m = static_cast<int>(rows.size());
  std::vector<double> out(static_cast<std::size_t>(m) * d);
  for (int i = 0; i < m; ++i) {
    std::copy_n(&px->values[static_cast<std::size_t>(rows[i]) * d], d,
                &out[static_cast<std::size_t>(i) * d]);
  }
  return make_op({m, d}, std::move(out), {px},
                 [rows = std::move(rows), d](Node& self) {
                   auto& p = *self.parents[0];
                   p.ensure_grad();
                   for (std::size_t i = 0; i < rows.size(); ++i) {
                     for (int j = 0; j < d; ++j) {
                       p.grad[static_cast<std::size_t>(rows[i]) * d + j] +=
                           self.grad[i * d + j];
                     }
                   }
                 });
}

Tensor pool_rows(const Tensor& x, std::vector<std::vector<int>> groups) {
  const auto& px = impl(x);
  check_rank2("pool_rows", *px);
  const int n = px->shape[0], d = px->shape[1];
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("pool_rows: empty group");
    for (int r : g) {
      if (r < 0 || r >= n) {
        throw std::out_of_range("pool_rows: row " + std::to_string(r) +
                                " out of range for " + shape_str(px->shape));
      }
    }
  }
  const int m = static_cast<int>(groups.size());
  std::vector<double> out(static_cast<std::size_t>(m) * d, 0.0);
  for (int i = 0; i < m; ++i) {
    const double inv = 1.0 / static_cast<double>(groups[i].size());
    for (int r : groups[i]) {
      for (int j = 0; j < d; ++j) {
        out[static_cast<std::size_t>(i) * d + j] +=
            px->values[static_cast<std::size_t>(r) * d + j] * inv;
      }
    }
  }
  return make_op({m, d}, std::move(out), {px},
                 [groups = std::move(groups), d](Node& self) {
                   auto& p = *self.parents[0];
                   p.ensure_grad();
                   for (std::size_t i = 0; i < groups.size(); ++i) {
                     const double inv = 1.0 / static_cast<double>(groups[i].size());
                     for (int r : groups[i]) {
                       for (int j = 0; j < d; ++j) {
                         p.grad[static_cast<std::size_t>(r) * d + j] +=
                             self.grad[i * d + j] * inv;
                       }
                     }
                   }
                 });
}

Tensor slice_cols(const Tensor& x, int col_begin, int col_end) {
  const auto& px = impl(x);
  check_rank2("slice_cols", *px);
  const int n = px->shape[0], d = px->shape[1];
  if (col_begin < 0 || col_end > d || col_begin >= col_end) {
    throw std::out_of_range("slice_cols: [" + std::to_string(col_begin) +
                            ", " + std::to_string(col_end) +
                            ") invalid for " + shape_str(px->shape));
  }
  const int w = col_end - col_begin;
  std::vector<double> out(static_cast<std::size_t>(n) * w);
  for (int i = 0; i < n; ++i) {
    std::copy_n(&px->values[static_cast<std::size_t>(i) * d + col_begin], w,
                &out[static_cast<std::size_t>(i) * w]);
  }
  return make_op({n, w}, std::move(out), {px},
                 [n, d, w, col_begin](Node& self) {
                   auto& p = *self.parents[0];
                   p.ensure_grad();
                   for (int i = 0; i < n; ++i) {
                     for (int j = 0; j < w; ++j) {
                       p.grad[static_cast<std::size_t>(i) * d + col_begin + j] +=
                           self.grad[static_cast<std::size_t>(i) * w + j];
                     }
                   }
                 });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& row) {
  const auto& px = impl(x);
  const auto& pr = impl(row);
  check_rank2("add_row_broadcast", *px);
  if (pr->shape.size() != 1 || pr->shape[0] != px->shape[1]) {
    throw std::invalid_argument("add_row_broadcast: " + shape_str(px->shape) +
                                " incompatible with row " +
                                shape_str(pr->shape));
  }
  const int n = px->shape[0], d = px->shape[1];
  std::vector<double> out(px->values.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      out[static_cast<std::size_t>(i) * d + j] =
          px->values[static_cast<std::size_t>(i) * d + j] + pr->values[j];
    }
  }
  return make_op(px->shape, std::move(out), {px, pr}, [n, d](Node& self) {
    auto& x_ = *self.parents[0];
    auto& r_ = *self.parents[1];
    if (x_.requires_grad) {
      x_.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        x_.grad[i] += self.grad[i];
      }
    }
    if (r_.requires_grad) {
      r_.ensure_grad();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
          r_.grad[j] += self.grad[static_cast<std::size_t>(i) * d + j];
        }
      }
    }
  });
}

Tensor pairwise_sum_rows(const Tensor& a, const Tensor& b) {
  const auto& pa = impl(a);
  const auto& pb = impl(b);
  check_rank2("pairwise_sum_rows", *pa);
  check_rank2("pairwise_sum_rows", *pb);
  if (pa->shape[1] != pb->shape[1]) {
    throw std::invalid_argument("pairwise_sum_rows: column mismatch, " +
                                shape_str(pa->shape) + " vs " +
                                shape_str(pb->shape));
  }
  const int p = pa->shape[0], s = pb->shape[0], d = pa->shape[1];
  std::vector<double> out(static_cast<std::size_t>(p) * s * d);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < s; ++j) {
      double* orow = &out[(static_cast<std::size_t>(i) * s + j) * d];
      const double* arow = &pa->values[static_cast<std::size_t>(i) * d];
      const double* brow = &pb->values[static_cast<std::size_t>(j) * d];
      for (int l = 0; l < d; ++l) orow[l] = arow[l] + brow[l];
    }
  }
  return make_op({p * s, d}, std::move(out), {pa, pb}, [p, s, d](Node& self) {
    auto& a_ = *self.parents[0];
    auto& b_ = *self.parents[1];
    if (a_.requires_grad) a_.ensure_grad();
    if (b_.requires_grad) b_.ensure_grad();
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < s; ++j) {
        const double* grow = &self.grad[(static_cast<std::size_t>(i) * s + j) * d];
        for (int l = 0; l < d; ++l) {
          if (a_.requires_grad) a_.grad[static_cast<std::size_t>(i) * d + l] += grow[l];
          if (b_.requires_grad) b_.grad[static_cast<std::size_t>(j) * d + l] += grow[l];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// topk
// ---------------------------------------------------------------------------

std::vector<int> topk(std::span<const double> scores, int k) {
  const int n = static_cast<int>(scores.size());
  if (k < 1 || k > n) {
    throw std::invalid_argument("topk: k=" + std::to_string(k) +
                                " out of range for n=" + std::to_string(n));
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // stable sort keeps ascending index order among equal values
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  idx.resize(k);
  return idx;
}

std::vector<int> topk(const Tensor& scores, int k) {
  if (scores.rank() != 1) {
    throw std::invalid_argument("topk: expected rank-1, got " +
                                shape_str(scores.shape()));
  }
  return topk(scores.values(), k);
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
  const auto& root = impl(loss);
  if (root->values.size() != 1) {
    throw std::invalid_argument("backward: loss is " +
                                shape_str(root->shape) + ", not a scalar");
  }
  if (!root->requires_grad) return;  // nothing reachable wants a gradient

  // Collect the reachable recorded subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p.get());
      }
    }
  }
  // Replay in reverse creation order: every op runs once, after everything
  // that consumed its output.
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
}

}  // namespace dualcorr::num
