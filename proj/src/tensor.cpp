#include "tsattr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tsattr {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
};

}  // namespace detail

using detail::Node;

namespace {

[[noreturn]] void fail(const std::string& op, const std::string& msg) {
  throw std::runtime_error("tensor op '" + op + "': " + msg);
}

void check_finite(const std::string& op, const std::vector<double>& data) {
  for (double v : data) {
    if (!std::isfinite(v)) fail(op, "non-finite value in result");
  }
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_2d(const std::string& op, const Tensor& a) {
  if (a.shape().size() != 2)
    fail(op, "expected 2-D tensor, got " + shape_str(a.shape()));
}

}  // namespace

Tensor make_op(std::string op, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(Node&)> backprop) {
  check_finite(op, data);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = std::move(op);
  bool rg = false;
  for (const Tensor& p : parents) rg = rg || p.requires_grad();
  node->requires_grad = rg;
  if (rg) {
    node->grad.assign(node->data.size(), 0.0);
    for (const Tensor& p : parents) node->parents.push_back(p.share_node());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

// Tensor needs access to share its node for make_op; declared here to keep the
// header free of shared_ptr plumbing.
std::shared_ptr<Node> Tensor::share_node() const { return node_; }

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size())
    fail("tensor", "shape " + shape_str(shape) + " does not match data length " +
                       std::to_string(data.size()));
  check_finite("tensor", data);
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(shape_size(shape), 0.0);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }

std::size_t Tensor::rows() const {
  require_2d("rows", *this);
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_2d("cols", *this);
  return node_->shape[1];
}

const std::vector<double>& Tensor::values() const { return node_->data; }

double Tensor::value() const {
  if (size() != 1) fail("value", "tensor is not a scalar: " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return node_->data.at(i); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
  if (!requires_grad()) fail(node_->op, "grad requested but requires_grad is false");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (requires_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

std::vector<double>& Tensor::mutable_data() {
  if (!node_->parents.empty()) fail(node_->op, "mutable_data on non-leaf tensor");
  return node_->data;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (int p = 0; p < 2; ++p) {
      Node& par = *n.parents[p];
      if (!par.requires_grad) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) par.grad[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += n.grad[i];
      if (pb.requires_grad) pb.grad[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_op("mul", a.shape(), std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += n.grad[i] * pb.data[i];
      if (pb.requires_grad) pb.grad[i] += n.grad[i] * pa.data[i];
    }
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * c;
  return make_op("scale", a.shape(), std::move(out), {a}, [c](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * c;
  });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_2d("add_rowvec", m);
  if (v.shape().size() != 1 || v.size() != m.cols())
    fail("add_rowvec", "vector shape " + shape_str(v.shape()) +
                           " does not match matrix cols " + std::to_string(m.cols()));
  const std::size_t R = m.rows(), C = m.cols();
  std::vector<double> out(m.size());
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = m.at(r * C + c) + v.at(c);
  return make_op("add_rowvec", m.shape(), std::move(out), {m, v}, [R, C](Node& n) {
    Node& pm = *n.parents[0];
    Node& pv = *n.parents[1];
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        if (pm.requires_grad) pm.grad[r * C + c] += n.grad[r * C + c];
        if (pv.requires_grad) pv.grad[c] += n.grad[r * C + c];
      }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  if (a.cols() != b.rows())
    fail("matmul", "inner dimensions differ: " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()));
  const std::size_t R = a.rows(), K = a.cols(), C = b.cols();
  std::vector<double> out(R * C, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a.at(r * K + k);
      for (std::size_t c = 0; c < C; ++c) out[r * C + c] += av * b.at(k * C + c);
    }
  return make_op("matmul", Shape{R, C}, std::move(out), {a, b}, [R, K, C](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) s += n.grad[r * C + c] * pb.data[k * C + c];
          pa.grad[r * K + k] += s;
        }
    }
    if (pb.requires_grad) {
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < R; ++r) s += pa.data[r * K + k] * n.grad[r * C + c];
          pb.grad[k * C + c] += s;
        }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    fail("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  return make_op("reshape", std::move(shape), a.values(), {a}, [](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d("slice_rows", a);
  if (begin >= end || end > a.rows())
    fail("slice_rows", "invalid row range [" + std::to_string(begin) + "," +
                           std::to_string(end) + ") for " + shape_str(a.shape()));
  const std::size_t C = a.cols();
  std::vector<double> out((end - begin) * C);
  std::copy(a.values().begin() + static_cast<std::ptrdiff_t>(begin * C),
            a.values().begin() + static_cast<std::ptrdiff_t>(end * C), out.begin());
  return make_op("slice_rows", Shape{end - begin, C}, std::move(out), {a},
                 [begin, C](Node& n) {
                   Node& pa = *n.parents[0];
                   for (std::size_t i = 0; i < n.grad.size(); ++i)
                     pa.grad[begin * C + i] += n.grad[i];
                 });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_rows", "no parts");
  require_2d("concat_rows", parts[0]);
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  std::vector<double> out;
  for (const Tensor& p : parts) {
    require_2d("concat_rows", p);
    if (p.cols() != C) fail("concat_rows", "column count mismatch");
    R += p.rows();
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return make_op("concat_rows", Shape{R, C}, std::move(out), parts, [](Node& n) {
    std::size_t off = 0;
    for (auto& pp : n.parents) {
      Node& p = *pp;
      if (p.requires_grad)
        for (std::size_t i = 0; i < p.data.size(); ++i) p.grad[i] += n.grad[off + i];
      off += p.data.size();
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return make_op("sum", Shape{1}, {s}, {a}, [](Node& n) {
    Node& pa = *n.parents[0];
    for (double& g : pa.grad) g += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0) * inv;
  return make_op("mean", Shape{1}, {s}, {a}, [inv](Node& n) {
    Node& pa = *n.parents[0];
    for (double& g : pa.grad) g += n.grad[0] * inv;
  });
}

Tensor abs_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += std::abs(v);
  return make_op("abs_sum", Shape{1}, {s}, {a}, [](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      const double sign = pa.data[i] > 0.0 ? 1.0 : (pa.data[i] < 0.0 ? -1.0 : 0.0);
      pa.grad[i] += n.grad[0] * sign;
    }
  });
}

Tensor select(const Tensor& a, std::size_t flat_index) {
  if (flat_index >= a.size())
    fail("select", "index " + std::to_string(flat_index) + " out of range for " +
                       shape_str(a.shape()));
  return make_op("select", Shape{1}, {a.at(flat_index)}, {a}, [flat_index](Node& n) {
    n.parents[0]->grad[flat_index] += n.grad[0];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) > 0.0 ? a.at(i) : 0.0;
  return make_op("relu", a.shape(), std::move(out), {a}, [](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (pa.data[i] > 0.0) pa.grad[i] += n.grad[i];
  });
}

namespace {
// max(z,0) + log1p(exp(-|z|)), overflow-free for large |z|.
double softplus_stable(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid_stable(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

Tensor softplus(const Tensor& a, double beta) {
  if (beta <= 0.0) fail("softplus", "beta must be positive");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus_stable(beta * a.at(i)) / beta;
  return make_op("softplus", a.shape(), std::move(out), {a}, [beta](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      pa.grad[i] += n.grad[i] * sigmoid_stable(beta * pa.data[i]);
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_stable(a.at(i));
  return make_op("sigmoid", a.shape(), std::move(out), {a}, [](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double y = n.data[i];
      pa.grad[i] += n.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh_op(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.at(i));
  return make_op("tanh", a.shape(), std::move(out), {a}, [](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double y = n.data[i];
      pa.grad[i] += n.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  require_2d("softmax_rows", a);
  const std::size_t R = a.rows(), C = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < R; ++r) {
    double mx = a.at(r * C);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a.at(r * C + c));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      out[r * C + c] = std::exp(a.at(r * C + c) - mx);
      z += out[r * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] /= z;
  }
  return make_op("softmax_rows", a.shape(), std::move(out), {a}, [R, C](Node& n) {
    Node& pa = *n.parents[0];
    for (std::size_t r = 0; r < R; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += n.grad[r * C + c] * n.data[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        pa.grad[r * C + c] += n.data[r * C + c] * (n.grad[r * C + c] - dot);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  require_2d("cross_entropy", logits);
  const std::size_t R = logits.rows(), C = logits.cols();
  if (labels.size() != R)
    fail("cross_entropy", "label count " + std::to_string(labels.size()) +
                              " does not match rows " + std::to_string(R));
  for (std::size_t y : labels)
    if (y >= C) fail("cross_entropy", "label " + std::to_string(y) + " out of range");
  double loss = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    double mx = logits.at(r * C);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits.at(r * C + c));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(logits.at(r * C + c) - mx);
    loss += mx + std::log(z) - logits.at(r * C + labels[r]);
  }
  loss /= static_cast<double>(R);
  auto labels_copy = labels;
  return make_op("cross_entropy", Shape{1}, {loss}, {logits},
                 [R, C, labels_copy](Node& n) {
                   Node& pa = *n.parents[0];
                   const double g = n.grad[0] / static_cast<double>(R);
                   for (std::size_t r = 0; r < R; ++r) {
                     double mx = pa.data[r * C];
                     for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, pa.data[r * C + c]);
                     double z = 0.0;
                     for (std::size_t c = 0; c < C; ++c) z += std::exp(pa.data[r * C + c] - mx);
                     for (std::size_t c = 0; c < C; ++c) {
                       const double p = std::exp(pa.data[r * C + c] - mx) / z;
                       pa.grad[r * C + c] += g * (p - (c == labels_copy[r] ? 1.0 : 0.0));
                     }
                   }
                 });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape("mse_loss", pred, target);
  const std::size_t n = pred.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.at(i) - target.at(i);
    loss += d * d;
  }
  loss /= static_cast<double>(n);
  return make_op("mse_loss", Shape{1}, {loss}, {pred, target}, [n](Node& nd) {
    Node& pp = *nd.parents[0];
    Node& pt = *nd.parents[1];
    const double g = nd.grad[0] * 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pp.data[i] - pt.data[i];
      if (pp.requires_grad) pp.grad[i] += g * d;
      if (pt.requires_grad) pt.grad[i] -= g * d;
    }
  });
}

void backward(const Tensor& scalar_output) {
  if (!scalar_output.defined()) fail("backward", "undefined tensor");
  if (scalar_output.size() != 1)
    fail("backward", "output is not a scalar: " + shape_str(scalar_output.shape()));
  if (!scalar_output.requires_grad())
    fail("backward", "output does not require grad (forward built without tracked inputs)");

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(scalar_output.node(), 0);
  visited.insert(scalar_output.node());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  scalar_output.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

std::vector<double> finite_diff_grad(const std::function<double(const Tensor&)>& f,
                                     const Tensor& x, double h) {
  if (h <= 0.0) fail("finite_diff_grad", "step must be positive");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> plus = x.values(), minus = x.values();
    plus[i] += h;
    minus[i] -= h;
    const double fp = f(Tensor(x.shape(), std::move(plus)));
    const double fm = f(Tensor(x.shape(), std::move(minus)));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace tsattr
