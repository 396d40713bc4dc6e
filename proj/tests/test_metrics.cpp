#include <doctest.h>

#include <cmath>
#include <random>

#include "tsattr/metrics.hpp"

using namespace tsattr;

namespace {

Attribution make_attr(std::size_t T, std::size_t N, std::vector<double> v) {
  Attribution a;
  a.steps = T;
  a.features = N;
  a.values = std::move(v);
  return a;
}

Mlp linear_model(const std::vector<double>& w, std::size_t in) {
  std::vector<Tensor> weights{Tensor(Shape{in, 1}, w, true)};
  std::vector<Tensor> biases{Tensor(Shape{1}, {0.0}, true)};
  return Mlp({in, 1}, Task::Regression, std::move(weights), std::move(biases), {});
}

// 2-logit classifier: logit_1 - logit_0 = w.x
Mlp linear_classifier(const std::vector<double>& w, std::size_t in) {
  std::vector<double> w2(in * 2);
  for (std::size_t i = 0; i < in; ++i) {
    w2[i * 2] = 0.0;
    w2[i * 2 + 1] = w[i];
  }
  std::vector<Tensor> weights{Tensor(Shape{in, 2}, w2, true)};
  std::vector<Tensor> biases{Tensor(Shape{2}, {0.0, 0.0}, true)};
  return Mlp({in, 2}, Task::Binary, std::move(weights), std::move(biases), {});
}

}  // namespace

// ---------------------------------------------------------------------------
// White-box metrics

TEST_CASE("perfect attribution scores 1 everywhere and zero error") {
  const std::vector<double> truth = {1, 0, 0, 1, 0, 0};
  Attribution a = make_attr(3, 2, {9.0, 2.0, 2.0, 9.0, 2.0, 2.0});
  MetricReport r = white_box_metrics(a, truth, true);
  CHECK(r.values["auprc"] == doctest::Approx(1.0));
  CHECK(r.values["roc_auc"] == doctest::Approx(1.0));
  CHECK(r.values["aup"] == doctest::Approx(1.0));
  CHECK(r.values["aur"] == doctest::Approx(1.0));
  CHECK(r.values["mae"] == doctest::Approx(0.0));
  CHECK(r.values["mse"] == doctest::Approx(0.0));
  CHECK(r.values["rmse"] == doctest::Approx(0.0));
}

TEST_CASE("inverted attribution scores the floor") {
  const std::vector<double> truth = {1, 0, 0, 1};
  Attribution a = make_attr(2, 2, {0.0, 1.0, 1.0, 0.0});
  MetricReport r = white_box_metrics(a, truth, true);
  CHECK(r.values["roc_auc"] == doctest::Approx(0.0));
  CHECK(r.values["aup"] == doctest::Approx(0.0));
  CHECK(r.values["aur"] == doctest::Approx(0.0));
  CHECK(r.values["mae"] == doctest::Approx(1.0));
  // worst-case average precision for 2 positives in 4 cells: hits at ranks 3,4
  CHECK(r.values["auprc"] == doctest::Approx(0.5 * (1.0 / 3.0 + 2.0 / 4.0)));
}

TEST_CASE("constant attribution normalizes to 0.5 and ties give roc_auc 0.5") {
  const std::vector<double> truth = {1, 0, 0, 0};
  Attribution a = make_attr(2, 2, {3.0, 3.0, 3.0, 3.0});
  MetricReport r = white_box_metrics(a, truth, true);
  CHECK(r.values["roc_auc"] == doctest::Approx(0.5));
  CHECK(r.values["mae"] == doctest::Approx(0.5));
  CHECK(r.values["mse"] == doctest::Approx(0.25));
}

TEST_CASE("random attribution auprc concentrates near the prevalence") {
  const std::size_t n = 400, pos = 80;  // p = 0.2
  std::vector<double> truth(n, 0.0);
  for (std::size_t i = 0; i < pos; ++i) truth[i * 5] = 1.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double mean = 0.0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> v(n);
    for (double& x : v) x = unif(rng);
    mean += white_box_metrics(make_attr(n, 1, v), truth, true).values["auprc"];
  }
  mean /= reps;
  CHECK(std::abs(mean - 0.2) < 0.05);
}

TEST_CASE("degenerate binary truth is rejected") {
  Attribution a = make_attr(2, 2, {1.0, 2.0, 3.0, 4.0});
  CHECK_THROWS(white_box_metrics(a, {0, 0, 0, 0}, true));
  CHECK_THROWS(white_box_metrics(a, {1, 1, 1, 1}, true));
  CHECK_THROWS(white_box_metrics(a, {0, 0.5, 1, 0}, true));
  CHECK_THROWS(white_box_metrics(a, {0, 1}, true));  // size mismatch
}

TEST_CASE("continuous truth skips ranking metrics but keeps errors") {
  Attribution a = make_attr(2, 2, {0.0, 0.25, 0.5, 1.0});
  MetricReport r = white_box_metrics(a, {0.0, 0.25, 0.5, 1.0}, false);
  CHECK(r.values["mae"] == doctest::Approx(0.0));
  CHECK(r.values.count("auprc") == 0);
  CHECK(r.values.count("roc_auc") == 0);
}

TEST_CASE("white-box metrics are invariant to monotone affine rescaling") {
  const std::vector<double> truth = {1, 0, 1, 0, 0, 0};
  Attribution a = make_attr(3, 2, {0.9, 0.1, 0.7, 0.3, 0.2, 0.05});
  Attribution b = a;
  for (double& v : b.values) v = 2.0 * v + 5.0;
  MetricReport ra = white_box_metrics(a, truth, true);
  MetricReport rb = white_box_metrics(b, truth, true);
  for (const auto& [k, v] : ra.values)
    CHECK(v == doctest::Approx(rb.values.at(k)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Mask policies

TEST_CASE("remove-top and keep-bottom select the identical masked set") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> attr(30);
  for (double& v : attr) v = unif(rng);
  attr[3] = attr[7];  // force a tie

  for (double f : {0.1, 0.2, 0.5, 0.8}) {
    MaskPolicy remove_top;
    remove_top.fraction = f;
    remove_top.side = MaskSide::Top;
    remove_top.mode = MaskAction::Remove;

    MaskPolicy keep_bottom;
    keep_bottom.fraction = 1.0 - f;
    keep_bottom.side = MaskSide::Bottom;
    keep_bottom.mode = MaskAction::Keep;

    // fractions f and 1-f split 30 cells exactly when 30f is integral
    CHECK(policy_masked_cells(remove_top, attr, 30) ==
          policy_masked_cells(keep_bottom, attr, 30));
  }
}

TEST_CASE("complementary policies perturb to bitwise-identical inputs") {
  Tensor x({5, 2}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  std::vector<double> attr = {5, 2, 8, 1, 9, 0, 3, 7, 4, 6};
  MaskPolicy remove_top;
  remove_top.fraction = 0.3;
  remove_top.noise_sigma = 0.05;
  remove_top.seed = 11;
  MaskPolicy keep_bottom = remove_top;
  keep_bottom.fraction = 0.7;
  keep_bottom.side = MaskSide::Bottom;
  keep_bottom.mode = MaskAction::Keep;
  CHECK(policy_perturb(remove_top, x, attr, 0) == policy_perturb(keep_bottom, x, attr, 0));
  CHECK(policy_perturb(remove_top, x, attr, 3) == policy_perturb(keep_bottom, x, attr, 3));
}

TEST_CASE("fraction 0 masks nothing, fraction 1 masks everything") {
  Tensor x({2, 2}, {1.0, 2.0, 3.0, 4.0});
  std::vector<double> attr = {4, 3, 2, 1};
  MaskPolicy p;
  p.fraction = 0.0;
  CHECK(policy_masked_cells(p, attr, 4).empty());
  CHECK(policy_perturb(p, x, attr, 0) == x.values());
  p.fraction = 1.0;
  CHECK(policy_masked_cells(p, attr, 4).size() == 4);
  CHECK(policy_perturb(p, x, attr, 0) == std::vector<double>(4, 0.0));
  p.fraction = 1.5;
  CHECK_THROWS(policy_masked_cells(p, attr, 4));
}

// ---------------------------------------------------------------------------
// Black-box metrics

TEST_CASE("empty mask yields the degenerate metric values") {
  Mlp m = linear_classifier({2.0, -1.0, 0.5, 1.5}, 4);
  Tensor x({2, 2}, {0.4, -0.2, 0.8, 0.1});
  Attribution a = make_attr(2, 2, {3, 1, 4, 2});
  MaskPolicy p;
  p.fraction = 0.0;
  CHECK(black_box_metric("comprehensiveness", m, x, a, p) == 0.0);
  CHECK(black_box_metric("log_odds", m, x, a, p) == 0.0);
  CHECK(black_box_metric("accuracy", m, x, a, p) == 1.0);
  // cross-entropy of the unperturbed prediction against itself: its entropy
  const std::vector<double> out = m.predict(x);
  const double p1 = 1.0 / (1.0 + std::exp(out[0] - out[1]));
  const double entropy = -(1 - p1) * std::log(1 - p1) - p1 * std::log(p1);
  CHECK(black_box_metric("cross_entropy", m, x, a, p) == doctest::Approx(entropy));
}

TEST_CASE("keep-everything sufficiency is exactly zero") {
  Mlp m = linear_classifier({1.0, 2.0, -1.0, 0.5}, 4);
  Tensor x({2, 2}, {0.3, 0.6, -0.4, 0.9});
  Attribution a = make_attr(2, 2, {1, 2, 3, 4});
  MaskPolicy p;
  p.fraction = 1.0;
  p.mode = MaskAction::Keep;
  CHECK(black_box_metric("sufficiency", m, x, a, p) == 0.0);
}

TEST_CASE("removing the top feature of a linear regressor moves mae/mse exactly") {
  Mlp m = linear_model({3.0, 1.0, 0.5, 0.1}, 4);
  Tensor x({2, 2}, {1.0, 1.0, 1.0, 1.0});
  Attribution a = make_attr(2, 2, {30, 10, 5, 1});  // aligned with |w*x|
  MaskPolicy p;
  p.fraction = 0.25;  // exactly one cell: the w=3 one
  CHECK(black_box_metric("mae", m, x, a, p) == doctest::Approx(3.0));
  CHECK(black_box_metric("mse", m, x, a, p) == doctest::Approx(9.0));
}

TEST_CASE("probability metrics reject regression models") {
  Mlp m = linear_model({1.0, 1.0}, 2);
  Tensor x({1, 2}, {0.5, 0.5});
  Attribution a = make_attr(1, 2, {1, 2});
  MaskPolicy p;
  for (const std::string& kind :
       {"accuracy", "comprehensiveness", "cross_entropy", "log_odds", "sufficiency"})
    CHECK_THROWS(black_box_metric(kind, m, x, a, p));
  CHECK_THROWS(black_box_metric("nonsense", m, x, a, p));
}

TEST_CASE("black-box metrics are invariant to monotone affine attribution rescaling") {
  Mlp m = linear_classifier({1.0, -2.0, 0.7, 0.3}, 4);
  Tensor x({2, 2}, {0.5, -0.1, 0.9, 0.4});
  Attribution a = make_attr(2, 2, {0.4, 0.1, 0.9, 0.2});
  Attribution b = a;
  for (double& v : b.values) v = 2.0 * v + 5.0;
  MaskPolicy p;
  p.fraction = 0.5;
  for (const std::string& kind : {"comprehensiveness", "log_odds", "cross_entropy"})
    CHECK(black_box_metric(kind, m, x, a, p) == black_box_metric(kind, m, x, b, p));
}

TEST_CASE("noisy multi-draw metrics are reproducible given the policy seed") {
  Mlp m = linear_classifier({1.0, -1.0, 0.5, 0.2}, 4);
  Tensor x({2, 2}, {0.5, -0.1, 0.9, 0.4});
  Attribution a = make_attr(2, 2, {4, 1, 3, 2});
  MaskPolicy p;
  p.fraction = 0.5;
  p.noise_sigma = 0.3;
  p.draws = 8;
  p.seed = 21;
  const double v1 = black_box_metric("comprehensiveness", m, x, a, p);
  const double v2 = black_box_metric("comprehensiveness", m, x, a, p);
  CHECK(v1 == v2);
  p.seed = 22;
  CHECK(black_box_metric("comprehensiveness", m, x, a, p) != v1);
}

TEST_CASE("draw weights: identical draw values make the weighting a no-op") {
  Mlp m = linear_classifier({1.0, -1.0, 0.5, 0.2}, 4);
  Tensor x({2, 2}, {0.5, -0.1, 0.9, 0.4});
  Attribution a = make_attr(2, 2, {4, 1, 3, 2});
  MaskPolicy none;
  none.fraction = 0.5;
  MaskPolicy cosine = none;
  cosine.weight_fn.kind = WeightFn::Kind::LimeCosine;
  // deterministic single draw: weighted mean == plain mean regardless of kernel
  CHECK(black_box_metric("comprehensiveness", m, x, a, none) ==
        doctest::Approx(black_box_metric("comprehensiveness", m, x, a, cosine)));

  MaskPolicy lof = none;
  lof.weight_fn.kind = WeightFn::Kind::Lof;
  CHECK_THROWS(black_box_metric("comprehensiveness", m, x, a, lof));  // no background
}

TEST_CASE("batch metric averages per-series scores") {
  Mlp m = linear_classifier({1.0, -1.0}, 2);
  SeriesBatch data;
  data.batch = 2;
  data.steps = 1;
  data.features = 2;
  data.label_kind = LabelKind::Static;
  data.inputs = {1.0, 0.0, 0.0, 1.0};
  data.labels = {1.0, 0.0};
  std::vector<Attribution> attrs = {make_attr(1, 2, {2, 1}), make_attr(1, 2, {1, 2})};
  MaskPolicy p;
  p.fraction = 0.0;
  CHECK(black_box_metric_batch("accuracy", m, data, attrs, p) == 1.0);
  attrs.pop_back();
  CHECK_THROWS(black_box_metric_batch("accuracy", m, data, attrs, p));
}

// ---------------------------------------------------------------------------
// Lipschitz stability

TEST_CASE("lipschitz_max of a constant method is zero") {
  Mlp m = linear_model({1.0, 1.0}, 2);
  Tensor x({1, 2}, {0.3, 0.7});
  AttributionFn constant = [](const Model&, const Tensor& in) {
    return Attribution{false, in.rows(), in.cols(),
                       std::vector<double>(in.size(), 1.0), {}, "const"};
  };
  CHECK(lipschitz_max(constant, m, x, 0.1, 20, 1) == 0.0);
}

TEST_CASE("lipschitz_max of the identity method is exactly one") {
  Mlp m = linear_model({1.0, 1.0}, 2);
  Tensor x({1, 2}, {0.3, 0.7});
  AttributionFn identity = [](const Model&, const Tensor& in) {
    return Attribution{false, in.rows(), in.cols(), in.values(), {}, "id"};
  };
  CHECK(lipschitz_max(identity, m, x, 0.1, 20, 1) == doctest::Approx(1.0));
}

TEST_CASE("lipschitz_max of a scaled method matches the scale and is seeded") {
  Mlp m = linear_model({1.0, 1.0}, 2);
  Tensor x({1, 2}, {0.3, 0.7});
  AttributionFn times3 = [](const Model&, const Tensor& in) {
    std::vector<double> v = in.values();
    for (double& e : v) e *= 3.0;
    return Attribution{false, in.rows(), in.cols(), std::move(v), {}, "x3"};
  };
  const double a = lipschitz_max(times3, m, x, 0.2, 30, 5);
  CHECK(a == doctest::Approx(3.0));
  CHECK(a == lipschitz_max(times3, m, x, 0.2, 30, 5));
  CHECK_THROWS(lipschitz_max(times3, m, x, 0.0, 10, 5));
  CHECK_THROWS(lipschitz_max(times3, m, x, 0.1, 0, 5));
}
