#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tsattr {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

// Dense f64 tensor, node in a reverse-mode computation graph. Value-semantics
// handle to a shared node; data is immutable after construction except through
// mutable_data(), which is only valid for leaf tensors.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // 2-D only
  std::size_t cols() const;  // 2-D only

  const std::vector<double>& values() const;
  double value() const;  // scalar only
  double at(std::size_t i) const;

  bool requires_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Leaf-only in-place access, used by optimizers and loaders.
  std::vector<double>& mutable_data();

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> share_node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(std::string op, Shape shape, std::vector<double> data,
                        std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backprop);
};

// Elementwise and structural primitives. All throw std::runtime_error with the
// op name on shape mismatch or non-finite results.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // broadcast v over rows
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor abs_sum(const Tensor& a);  // L1, used by mask penalties
Tensor select(const Tensor& a, std::size_t flat_index);

Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a, double beta = 1.0);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

// Mean cross-entropy from logits (rows) against integer class labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);
// Mean squared error against a constant target.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Reverse pass from a scalar output. Zeroes every gradient in the reached
// graph first, visits each node exactly once.
void backward(const Tensor& scalar_output);

// Central-difference gradient of a scalar function, the test oracle.
std::vector<double> finite_diff_grad(const std::function<double(const Tensor&)>& f,
                                     const Tensor& x, double h = 1e-5);

}  // namespace tsattr
