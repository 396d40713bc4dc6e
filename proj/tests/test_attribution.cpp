#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tsattr/attribution.hpp"
#include "tsattr/datasets.hpp"
#include "tsattr/model.hpp"

using namespace tsattr;

namespace {

// Linear model F = w.x as a bias-free single-layer MLP.
Mlp linear_model(const std::vector<double>& w, std::size_t in) {
  std::vector<Tensor> weights{Tensor(Shape{in, 1}, w, true)};
  std::vector<Tensor> biases{Tensor(Shape{1}, {0.0}, true)};
  return Mlp({in, 1}, Task::Regression, std::move(weights), std::move(biases), {});
}

Mlp constant_model(std::size_t in) {
  std::vector<Tensor> weights{Tensor::zeros({in, 1}, true)};
  std::vector<Tensor> biases{Tensor(Shape{1}, {0.7}, true)};
  return Mlp({in, 1}, Task::Regression, std::move(weights), std::move(biases), {});
}

Tensor random_series(std::size_t T, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> v(T * N);
  for (double& x : v) x = unif(rng);
  return Tensor({T, N}, v);
}

// Brute-force Shapley values over all 2^D coalitions: the oracle for
// exhaustive kernel_shap.
std::vector<double> brute_force_shapley(const Model& model, const Tensor& x,
                                        const std::vector<double>& base) {
  const std::size_t T = x.rows(), N = x.cols(), D = T * N;
  auto value = [&](std::size_t bits) {
    std::vector<double> pt(D);
    for (std::size_t i = 0; i < D; ++i)
      pt[i] = (bits >> i) & 1u ? x.at(i) : base[i];
    return model.forward(Tensor({T, N}, pt)).at(0);
  };
  std::vector<double> factorial(D + 1, 1.0);
  for (std::size_t i = 1; i <= D; ++i)
    factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> phi(D, 0.0);
  for (std::size_t bits = 0; bits < (1u << D); ++bits) {
    const std::size_t s = static_cast<std::size_t>(__builtin_popcount(bits));
    const double v = value(bits);
    for (std::size_t i = 0; i < D; ++i) {
      if ((bits >> i) & 1u) continue;
      const double w = factorial[s] * factorial[D - s - 1] / factorial[D];
      const double v_with = value(bits | (1u << i));
      phi[i] += w * (v_with - v);
    }
  }
  return phi;
}

// Brute-force LOF straight from the definition, the oracle for lof_score.
double brute_force_lof(const std::vector<double>& q,
                       const std::vector<std::vector<double>>& X, std::size_t k) {
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  auto neighbors = [&](const std::vector<double>& p, std::ptrdiff_t exclude) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < X.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == exclude) continue;
      d.emplace_back(dist(p, X[j]), j);
    }
    std::sort(d.begin(), d.end());
    d.resize(k);
    return d;
  };
  std::vector<double> kdist(X.size());
  for (std::size_t j = 0; j < X.size(); ++j)
    kdist[j] = neighbors(X[j], static_cast<std::ptrdiff_t>(j)).back().first;
  auto lrd = [&](const std::vector<double>& p, std::ptrdiff_t exclude) {
    double reach = 0.0;
    for (const auto& [dd, o] : neighbors(p, exclude))
      reach += std::max(kdist[o], dd);
    return 1.0 / std::max(reach / static_cast<double>(k), 1e-12);
  };
  double num = 0.0;
  for (const auto& [dd, o] : neighbors(q, -1))
    num += lrd(X[o], static_cast<std::ptrdiff_t>(o));
  return num / static_cast<double>(k) / lrd(q, -1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Integrated Gradients

TEST_CASE("IG is zero when x equals the baseline") {
  Mlp m({6, 4, 1}, Task::Regression, {Activation::Tanh, 1.0}, 3);
  BaselineSpec base;
  base.kind = BaselineSpec::Kind::Constant;
  base.constant = 0.4;
  Tensor x = Tensor::full({2, 3}, 0.4);
  Attribution a = integrated_gradients(m, x, base, 16);
  for (double v : a.values) CHECK(v == 0.0);
}

TEST_CASE("IG on a linear model is exact for any step count >= 2") {
  const std::vector<double> w = {1.0, -2.0, 0.5, 3.0};
  Mlp m = linear_model(w, 4);
  Tensor x({2, 2}, {0.3, -1.0, 2.0, 0.7});
  BaselineSpec base;  // zeros
  for (std::size_t steps : {2, 7, 64}) {
    Attribution a = integrated_gradients(m, x, base, steps);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(a.values[i] == doctest::Approx(w[i] * x.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("IG completeness on a ReLU MLP and residual shrinks with steps") {
  // inputs small enough that only a few ReLU kinks fall on the path; the
  // trapezoid rule converges like 1/steps per crossed kink
  std::size_t improved = 0;
  for (std::uint64_t seed = 180; seed < 190; ++seed) {
    Mlp m({8, 10, 1}, Task::Regression, {Activation::ReLU, 1.0}, seed);
    std::mt19937_64 rng(seed + 100);
    std::uniform_real_distribution<double> unif(-0.05, 0.05);
    std::vector<double> xv(8);
    for (double& v : xv) v = unif(rng);
    Tensor x({2, 4}, xv);
    BaselineSpec base;
    const double fx = m.predict(x)[0];
    const double f0 = m.predict(Tensor::zeros({2, 4}))[0];
    auto residual = [&](std::size_t steps) {
      Attribution a = integrated_gradients(m, x, base, steps);
      double s = 0.0;
      for (double v : a.values) s += v;
      return std::abs(s - (fx - f0));
    };
    const double r512 = residual(512);
    CHECK(r512 <= 1e-3 * std::abs(fx - f0));
    if (r512 <= residual(8) + 1e-15) ++improved;
  }
  CHECK(improved >= 9);
}

TEST_CASE("IG rejects an out-of-range target") {
  Mlp m({4, 3}, Task::Multiclass, {Activation::ReLU, 1.0}, 1);
  BaselineSpec base;
  CHECK_THROWS(integrated_gradients(m, random_series(2, 2, 5), base, 8, 7));
}

// ---------------------------------------------------------------------------
// Temporal Integrated Gradients

TEST_CASE("TIG is zero when every x_t equals the baseline at t") {
  Rnn rnn(2, 5, 1, Task::Regression, 4);
  BaselineSpec base;
  base.kind = BaselineSpec::Kind::Constant;
  base.constant = -0.3;
  Tensor x = Tensor::full({5, 2}, -0.3);
  Attribution a = temporal_integrated_gradients(rnn, x, base, 16);
  for (double v : a.values) CHECK(v == 0.0);
}

TEST_CASE("TIG per-step completeness on an RNN") {
  Rnn rnn(3, 6, 2, Task::Binary, 9);
  Tensor x = random_series(6, 3, 17);
  BaselineSpec base;
  Attribution a = temporal_integrated_gradients(rnn, x, base, 512, false);
  const std::size_t T = 6, N = 3;
  for (std::size_t t = 0; t < T; ++t) {
    // endpoints differ only in time-t coordinates
    std::vector<double> full(x.values().begin(), x.values().begin() + (t + 1) * N);
    std::vector<double> cropped = full;
    for (std::size_t f = 0; f < N; ++f) cropped[t * N + f] = 0.0;
    Tensor cf({t + 1, N}, full);
    const std::size_t tgt = resolve_target(rnn, cf, t);
    const double f1 = rnn.forward(cf).at(t * 2 + tgt);
    const double f0 = rnn.forward(Tensor({t + 1, N}, cropped)).at(t * 2 + tgt);
    double s = 0.0;
    for (std::size_t f = 0; f < N; ++f) s += a.at(t, f);
    CHECK(std::abs(s - (f1 - f0)) <= 1e-3 * std::max(std::abs(f1 - f0), 1e-9));
  }
}

TEST_CASE("TIG on a memoryless-head RNN reduces to linear IG per step") {
  // zero recurrence and identity-ish head: output_t = w.x_t
  const std::size_t N = 2, H = 2;
  std::vector<Tensor> params;
  params.emplace_back(Shape{N, H}, std::vector<double>{1.0, 0.0, 0.0, 1.0}, true);
  params.emplace_back(Shape{H, H}, std::vector<double>(H * H, 0.0), true);
  params.emplace_back(Shape{H}, std::vector<double>(H, 0.0), true);
  params.emplace_back(Shape{H, 1}, std::vector<double>{2.0, -1.5}, true);
  params.emplace_back(Shape{1}, std::vector<double>{0.0}, true);
  Rnn rnn(N, H, 1, Task::Regression, params, {Activation::Identity, 1.0});

  Tensor x({3, 2}, {0.4, 0.1, -0.2, 0.6, 0.9, -0.8});
  BaselineSpec base;
  Attribution a = temporal_integrated_gradients(rnn, x, base, 32, false);
  const double w[2] = {2.0, -1.5};
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t f = 0; f < 2; ++f)
      CHECK(a.at(t, f) == doctest::Approx(w[f] * x.at(t * 2 + f)).epsilon(1e-10));
}

TEST_CASE("TIG rejects fixed-length models") {
  Mlp m({6, 4, 2}, Task::Binary, {Activation::ReLU, 1.0}, 2);
  BaselineSpec base;
  CHECK_THROWS_WITH_AS(
      temporal_integrated_gradients(m, random_series(3, 2, 1), base, 8),
      doctest::Contains("causal"), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Time Forward Tunnel

namespace {
InnerMethod ig_inner(std::size_t steps) {
  return [steps](const Model& m, const Tensor& x, std::optional<std::size_t> tgt) {
    return integrated_gradients(m, x, BaselineSpec{}, steps, tgt);
  };
}
}  // namespace

TEST_CASE("TFT with T=1 equals the inner method on the full input") {
  Mlp m({3, 5, 2}, Task::Binary, {Activation::ReLU, 1.0}, 6);
  Tensor x = random_series(1, 3, 2);
  Attribution direct = ig_inner(32)(m, x, resolve_target(m, x, 0));
  Attribution tft = time_forward_tunnel(ig_inner(32), m, x);
  CHECK(tft.values == direct.values);
}

TEST_CASE("TFT(IG) differs from TIG on an RNN with nonzero recurrence") {
  Rnn rnn(2, 6, 1, Task::Regression, 31);
  Tensor x = random_series(4, 2, 3);
  Attribution tft = time_forward_tunnel(ig_inner(64), rnn, x);
  Attribution tig = temporal_integrated_gradients(rnn, x, BaselineSpec{}, 64, false);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < tft.values.size(); ++i)
    max_diff = std::max(max_diff, std::abs(tft.values[i] - tig.values[i]));
  CHECK(max_diff > 1e-6);
}

TEST_CASE("temporal-mode TFT output is strictly zero above the diagonal") {
  Rnn rnn(2, 4, 1, Task::Regression, 8);
  Tensor x = random_series(5, 2, 9);
  Attribution a = time_forward_tunnel(ig_inner(16), rnn, x, true);
  REQUIRE(a.temporal);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t tp = t + 1; tp < 5; ++tp)
      for (std::size_t f = 0; f < 2; ++f) CHECK(a.at(t, tp, f) == 0.0);
}

// ---------------------------------------------------------------------------
// Occlusion

TEST_CASE("occlusion of a constant model is zero for every strategy") {
  Mlp m = constant_model(6);
  Tensor x = random_series(3, 2, 4);
  SeriesBatch bg;
  bg.batch = 4;
  bg.steps = 3;
  bg.features = 2;
  bg.inputs.assign(4 * 3 * 2, 0.5);
  BackgroundView bgv{&bg.inputs, 4, 3, 2};

  for (auto strat : {OcclusionStrategy::Fixed, OcclusionStrategy::Augmented}) {
    Attribution a = occlusion(m, x, strat, BaselineSpec{}, bgv, 5);
    for (double v : a.values) CHECK(v == 0.0);
  }
}

TEST_CASE("occlusion on a linear model with zero baseline is w*x") {
  const std::vector<double> w = {1.5, -0.5, 2.0, 1.0};
  Mlp m = linear_model(w, 4);
  Tensor x({2, 2}, {0.2, 0.4, -0.6, 1.0});
  Attribution a = occlusion(m, x, OcclusionStrategy::Fixed, BaselineSpec{}, {});
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(a.values[i] == doctest::Approx(w[i] * x.at(i)).epsilon(1e-12));
}

TEST_CASE("augmented occlusion with background {x} is identically zero") {
  Rnn rnn(2, 4, 1, Task::Regression, 12);
  Tensor x({1, 2}, {0.7, -0.3});  // single time step: every bootstrap draw is x itself
  std::vector<double> bgdata = x.values();
  BackgroundView bgv{&bgdata, 1, 1, 2};
  Attribution a = occlusion(rnn, x, OcclusionStrategy::Augmented, {}, bgv, 10);
  for (double v : a.values) CHECK(v == 0.0);
}

TEST_CASE("augmented occlusion without a background errors") {
  Mlp m = linear_model({1.0, 1.0}, 2);
  CHECK_THROWS(occlusion(m, random_series(1, 2, 1), OcclusionStrategy::Augmented, {}, {}));
}

// ---------------------------------------------------------------------------
// LOF

TEST_CASE("lof_score matches brute force on grid configurations") {
  std::vector<std::vector<double>> grid;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      grid.push_back({static_cast<double>(i), static_cast<double>(j)});

  const std::vector<double> center = {2.0, 2.0};
  CHECK(lof_score(center, grid, 4) ==
        doctest::Approx(brute_force_lof(center, grid, 4)).epsilon(1e-9));
  CHECK(std::abs(lof_score(center, grid, 4) - 1.0) < 0.2);

  const std::vector<double> far = {400.0, 400.0};
  CHECK(lof_score(far, grid, 4) ==
        doctest::Approx(brute_force_lof(far, grid, 4)).epsilon(1e-9));
  CHECK(lof_score(far, grid, 4) > 10.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 6.0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::vector<double> q = {unif(rng), unif(rng)};
    CHECK(lof_score(q, grid, 4) ==
          doctest::Approx(brute_force_lof(q, grid, 4)).epsilon(1e-9));
  }
}

TEST_CASE("degenerate identical points clamp to LOF = 1") {
  std::vector<std::vector<double>> same(6, std::vector<double>{1.0, 1.0});
  CHECK(lof_score({1.0, 1.0}, same, 5) == doctest::Approx(1.0));
}

TEST_CASE("lof preconditions") {
  std::vector<std::vector<double>> two = {{0.0}, {1.0}};
  CHECK_THROWS(lof_score({0.5}, two, 2));  // needs k+1 points
  CHECK_THROWS(lof_score({0.5}, two, 0));
}

// ---------------------------------------------------------------------------
// LIME / KernelSHAP

TEST_CASE("exhaustive kernel_shap equals brute-force Shapley on a linear model") {
  const std::vector<double> w = {1.0, -2.0, 0.5, 3.0, -0.7, 1.2};
  Mlp m = linear_model(w, 6);
  Tensor x({2, 3}, {0.4, -0.9, 1.3, 0.2, -0.5, 0.8});
  KernelShapOptions opts;
  Attribution a = kernel_shap(m, x, opts);
  const std::vector<double> oracle =
      brute_force_shapley(m, x, std::vector<double>(6, 0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::abs(a.values[i] - oracle[i]) < 1e-6);
    CHECK(a.values[i] == doctest::Approx(w[i] * x.at(i)).epsilon(1e-8));
    total += a.values[i];
  }
  CHECK(std::abs(total - m.predict(x)[0]) < 1e-8);  // efficiency
}

TEST_CASE("exhaustive kernel_shap matches brute force on a nonlinear model") {
  Mlp m({4, 5, 1}, Task::Regression, {Activation::Tanh, 1.0}, 19);
  Tensor x = random_series(2, 2, 23);
  Attribution a = kernel_shap(m, x, {});
  const std::vector<double> oracle =
      brute_force_shapley(m, x, std::vector<double>(4, 0.0));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(a.values[i] - oracle[i]) < 1e-6);
}

TEST_CASE("constant model gives zero coefficients for lime and kernel_shap") {
  Mlp m = constant_model(4);
  Tensor x = random_series(2, 2, 31);
  Attribution ks = kernel_shap(m, x, {});
  for (double v : ks.values) CHECK(std::abs(v) < 1e-9);
  LimeOptions lo;
  lo.n_samples = 200;
  lo.seed = 3;
  Attribution lm = lime(m, x, lo);
  for (double v : lm.values) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("lof variants reduce to vanilla when every masked point is an inlier") {
  // background = every masked corner of the baseline/input hypercube, each
  // duplicated three times: with k=2 every LOF query sits on exact copies and
  // clamps to 1, so the similarity weight is identically 1
  const std::vector<double> w = {1.0, 0.5, -0.8, 0.3};
  Mlp m = linear_model(w, 4);
  Tensor x({2, 2}, {0.5, -0.5, 0.25, -0.25});

  std::vector<double> bgdata;
  for (std::size_t bits = 0; bits < 16; ++bits)
    for (int copy = 0; copy < 3; ++copy)
      for (std::size_t i = 0; i < 4; ++i)
        bgdata.push_back((bits >> i) & 1 ? x.at(i) : 0.0);
  BackgroundView bgv{&bgdata, 48, 2, 2};

  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < 48; ++i) pts.push_back(bgv.series(i));
  for (std::size_t bits = 0; bits < 16; ++bits) {
    std::vector<double> pt(4);
    for (std::size_t i = 0; i < 4; ++i) pt[i] = (bits >> i) & 1 ? x.at(i) : 0.0;
    REQUIRE(lof_score(pt, pts, 2) <= 1.0 + 1e-12);
  }

  KernelShapOptions vanilla;
  KernelShapOptions lof;
  lof.lof_kernel = true;
  lof.background = bgv;
  lof.lof_k = 2;
  Attribution a = kernel_shap(m, x, vanilla);
  Attribution b = kernel_shap(m, x, lof);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(a.values[i] - b.values[i]) < 1e-8);

  LimeOptions lv, ll;
  lv.n_samples = 120;
  lv.seed = 7;
  ll = lv;
  ll.lof_kernel = true;
  ll.background = bgv;
  ll.lof_k = 2;
  Attribution la = lime(m, x, lv);
  Attribution lb = lime(m, x, ll);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(la.values[i] - lb.values[i]) < 1e-8);
}

TEST_CASE("stochastic methods are reproducible given a seed") {
  Mlp m({4, 6, 2}, Task::Binary, {Activation::ReLU, 1.0}, 3);
  Tensor x = random_series(2, 2, 8);
  LimeOptions lo;
  lo.n_samples = 100;
  lo.seed = 42;
  CHECK(lime(m, x, lo).values == lime(m, x, lo).values);
  KernelShapOptions ko;
  ko.n_samples = 100;
  ko.seed = 42;
  CHECK(kernel_shap(m, x, ko).values == kernel_shap(m, x, ko).values);
}

// ---------------------------------------------------------------------------
// DynaMask

TEST_CASE("dynamask on an input-ignoring model collapses the mask") {
  Mlp m = constant_model(8);
  Tensor x = random_series(4, 2, 3);
  DynamaskOptions opts;
  opts.keep_ratio = 0.1;
  opts.epochs = 100;
  opts.outer_steps = 6;
  Attribution a = dynamask(m, x, opts);
  for (double v : a.values) CHECK(v < 0.2);
}

TEST_CASE("dynamask recovers the arma salient window") {
  ArmaSpec spec;
  spec.batch = 1;
  spec.steps = 20;
  spec.features = 2;
  spec.t_begin = 8;
  spec.t_end = 12;
  spec.salient_features = {1};
  spec.seed = 6;
  ArmaDataset ds = generate_arma(spec);
  DynamaskOptions opts;
  opts.keep_ratio = 4.0 * 1.0 / (20.0 * 2.0);  // window fraction
  opts.epochs = 150;
  opts.window = 5;
  Attribution a = dynamask(*ds.regressor, ds.data.series(0), opts);

  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t f = 0; f < 2; ++f) {
      const bool sal = t >= 8 && t < 12 && f == 1;
      if (sal) {
        inside += a.at(t, f);
        ++n_in;
      } else {
        outside += a.at(t, f);
        ++n_out;
      }
    }
  CHECK(inside / n_in > outside / n_out);
}

TEST_CASE("dynamask validates its options") {
  Mlp m = constant_model(4);
  Tensor x = random_series(2, 2, 1);
  DynamaskOptions opts;
  opts.keep_ratio = 1.5;
  CHECK_THROWS(dynamask(m, x, opts));
  opts = {};
  opts.window = 4;  // even
  CHECK_THROWS(dynamask(m, x, opts));
}

// ---------------------------------------------------------------------------
// Non-linearities tunnel

TEST_CASE("tunnel(IG) is bit-identical to IG on the manually swapped model") {
  Mlp m({4, 6, 2}, Task::Binary, {Activation::ReLU, 1.0}, 13);
  Tensor x = random_series(2, 2, 14);
  std::vector<ActivationSwap> swaps{{Activation::ReLU, Activation::Softplus, 10.0}};
  Attribution tunneled = nonlinearities_tunnel(ig_inner(64), m, swaps, x);
  ModelPtr manual = swap_activations(m, Activation::ReLU, Activation::Softplus, 10.0);
  Attribution direct = ig_inner(64)(*manual, x, std::nullopt);
  CHECK(tunneled.values == direct.values);
}

TEST_CASE("tunnel on a model without ReLU is a no-op") {
  Mlp m({4, 6, 2}, Task::Binary, {Activation::Tanh, 1.0}, 13);
  Tensor x = random_series(2, 2, 14);
  std::vector<ActivationSwap> swaps{{Activation::ReLU, Activation::Softplus, 10.0}};
  Attribution tunneled = nonlinearities_tunnel(ig_inner(32), m, swaps, x);
  Attribution direct = ig_inner(32)(m, x, std::nullopt);
  CHECK(tunneled.values == direct.values);
}

TEST_CASE("linear model attribution is unchanged by any swap") {
  Mlp m = linear_model({1.0, 2.0, -1.0, 0.5}, 4);
  Tensor x = random_series(2, 2, 15);
  std::vector<ActivationSwap> swaps{{Activation::ReLU, Activation::Softplus, 2.0}};
  Attribution tunneled = nonlinearities_tunnel(ig_inner(16), m, swaps, x);
  Attribution direct = ig_inner(16)(m, x, std::nullopt);
  CHECK(tunneled.values == direct.values);
}

// ---------------------------------------------------------------------------
// Attribution serialization

TEST_CASE("attribution csv round-trip") {
  Attribution a;
  a.steps = 3;
  a.features = 2;
  a.method = "test";
  a.values = {0.1, -0.2, 0.3, 0.0, 1.5, -2.5};
  save_attribution(a, "attr_roundtrip.csv");
  Attribution b = load_attribution("attr_roundtrip.csv");
  CHECK(b.values == a.values);
  CHECK(b.steps == 3);
  CHECK(b.features == 2);
  std::remove("attr_roundtrip.csv");
}
