#include <doctest.h>

#include <cmath>
#include <random>

#include "tsattr/model.hpp"
#include "tsattr/tensor.hpp"

using namespace tsattr;

TEST_CASE("identity and elementwise basics") {
  Tensor x({2}, {1.0, 2.0});
  CHECK(x.values() == std::vector<double>{1.0, 2.0});

  Tensor r = relu(Tensor({3}, {-1.0, 0.0, 3.0}));
  CHECK(r.values() == std::vector<double>{0.0, 0.0, 3.0});

  Tensor sp = softplus(Tensor::scalar(0.0));
  CHECK(sp.value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softplus is stable for large magnitudes") {
  Tensor big = softplus(Tensor({2}, {500.0, -500.0}));
  CHECK(big.at(0) == doctest::Approx(500.0));
  CHECK(big.at(1) == doctest::Approx(0.0));
}

TEST_CASE("backward of square and linear map") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = mul(x, x);
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));

  Tensor v({3}, {0.7, -1.2, 2.0}, true);
  Tensor w({3}, {1.0, 2.0, 3.0});
  backward(sum(mul(v, w)));
  CHECK(v.grad()[0] == doctest::Approx(1.0));
  CHECK(v.grad()[1] == doctest::Approx(2.0));
  CHECK(v.grad()[2] == doctest::Approx(3.0));
}

TEST_CASE("backward before forward / non-scalar selection errors") {
  Tensor x({2}, {1.0, 2.0});  // no grad tracking
  CHECK_THROWS(backward(sum(x)));
  Tensor y({2}, {1.0, 2.0}, true);
  CHECK_THROWS(backward(mul(y, y)));  // not a scalar
}

TEST_CASE("shape mismatch errors name the op") {
  Tensor a({2}, {1.0, 2.0});
  Tensor b({3}, {1.0, 2.0, 3.0});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), std::runtime_error);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), std::runtime_error);
}

TEST_CASE("finite_diff_grad analytic cases") {
  auto square = [](const Tensor& t) { return t.value() * t.value(); };
  auto g = finite_diff_grad(square, Tensor::scalar(3.0), 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));

  auto constant = [](const Tensor&) { return 4.2; };
  auto gz = finite_diff_grad(constant, Tensor({3}, {1.0, 2.0, 3.0}));
  for (double v : gz) CHECK(v == 0.0);
}

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// compares backward() against the central-difference oracle for a scalar fn
void check_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                double tol) {
  Tensor x(x0.shape(), x0.values(), true);
  Tensor y = f(x);
  backward(y);
  auto fd = finite_diff_grad([&](const Tensor& z) { return f(z).value(); }, x0, 1e-5);
  for (std::size_t i = 0; i < fd.size(); ++i)
    CHECK(rel_err(x.grad()[i], fd[i]) < tol);
}

}  // namespace

TEST_CASE("every primitive matches the finite-difference oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  auto rand_tensor = [&](Shape s) {
    std::vector<double> d(shape_size(s));
    for (double& v : d) v = unif(rng);
    return Tensor(std::move(s), std::move(d));
  };

  for (int rep = 0; rep < 100; ++rep) {
    Tensor x = rand_tensor({2, 3});
    Tensor other = rand_tensor({2, 3});
    Tensor w = rand_tensor({3, 2});

    check_grad([&](const Tensor& z) { return sum(add(z, other)); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return sum(mul(z, other)); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return sum(matmul(z, w)); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return mean(tanh_op(z)); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return mean(sigmoid(z)); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return mean(softplus(z, 2.0)); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return sum(mul(softmax_rows(z), other)); }, x, 1e-4);
    check_grad([&](const Tensor& z) { return select(slice_rows(z, 1, 2), 1); }, x, 1e-5);
    check_grad([&](const Tensor& z) { return cross_entropy(z, {1, 0}); }, x, 1e-4);
    check_grad([&](const Tensor& z) { return mse_loss(z, other); }, x, 1e-5);
  }
}

TEST_CASE("2-layer MLP gradient matches finite differences") {
  Mlp mlp({5, 7, 1}, Task::Regression, {Activation::Tanh, 1.0}, 11);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<double> xv(5);
  for (double& v : xv) v = unif(rng);
  Tensor x0({1, 5}, xv);

  Tensor x(x0.shape(), x0.values(), true);
  backward(select(mlp.forward(x), 0));
  auto fd = finite_diff_grad(
      [&](const Tensor& z) { return mlp.forward(z).value(); }, x0, 1e-5);
  for (std::size_t i = 0; i < fd.size(); ++i)
    CHECK(std::abs(x.grad()[i] - fd[i]) <
          1e-5 * std::max(1.0, std::abs(fd[i])));
}

TEST_CASE("backward linearity and determinism") {
  Tensor x({3}, {0.5, -1.0, 2.0}, true);
  Tensor w1({3}, {1.0, 0.0, 2.0});
  Tensor w2({3}, {-1.0, 3.0, 0.5});

  backward(sum(mul(x, w1)));
  auto g1 = x.grad();
  backward(sum(mul(x, w2)));
  auto g2 = x.grad();
  backward(add(sum(mul(x, w1)), sum(mul(x, w2))));
  auto gs = x.grad();
  for (std::size_t i = 0; i < 3; ++i) CHECK(gs[i] == g1[i] + g2[i]);

  // repeated forward/backward bit-identical
  backward(sum(mul(x, w1)));
  CHECK(x.grad() == g1);
}

TEST_CASE("NaN in a result is an error, not silent propagation") {
  CHECK_THROWS(Tensor({1}, {std::nan("")}));
}
