#include "tsattr/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tsattr {

std::vector<double> BackgroundView::series(std::size_t m) const {
  const std::size_t n = steps * features;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (*data)[m * n + i];
  return out;
}

std::vector<double> resolve_baseline(const BaselineSpec& spec, std::size_t steps,
                                     std::size_t features, std::uint64_t seed) {
  const std::size_t n = steps * features;
  switch (spec.kind) {
    case BaselineSpec::Kind::Zeros:
      return std::vector<double>(n, 0.0);
    case BaselineSpec::Kind::Constant:
      return std::vector<double>(n, spec.constant);
    case BaselineSpec::Kind::Sample: {
      if (spec.background.empty())
        throw std::runtime_error("baseline: sample kind requires a non-empty background set");
      if (spec.background.steps < steps || spec.background.features != features)
        throw std::runtime_error("baseline: background shape incompatible with input");
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(0, spec.background.count - 1);
      const std::size_t m = pick(rng);
      std::vector<double> out(n);
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t f = 0; f < features; ++f)
          out[t * features + f] = spec.background.at(m, t, f);
      return out;
    }
  }
  throw std::runtime_error("invalid baseline kind");
}

namespace {

// Scalar model output for the prediction at time t (last row for recurrent
// outputs, the single row otherwise) and output index `target`.
std::size_t flat_output_index(const Tensor& out, std::size_t t, std::size_t target) {
  if (out.shape().size() == 2 && out.rows() > 1) {
    if (target >= out.cols()) throw std::runtime_error("target index out of range");
    return t * out.cols() + target;
  }
  if (target >= out.size()) throw std::runtime_error("target index out of range");
  return target;
}

double eval_scalar(const Model& model, const std::vector<double>& xv, std::size_t T,
                   std::size_t N, std::size_t t, std::size_t target) {
  Tensor out = model.forward(Tensor(Shape{T, N}, xv));
  return out.at(flat_output_index(out, t, target));
}

// Gradient of the scalar output w.r.t. the input at the given point.
std::vector<double> input_gradient(const Model& model, const std::vector<double>& xv,
                                   std::size_t T, std::size_t N, std::size_t t,
                                   std::size_t target) {
  Tensor x(Shape{T, N}, xv, true);
  Tensor out = model.forward(x);
  backward(select(reshape(out, {out.size()}), flat_output_index(out, t, target)));
  return x.grad();
}

// Trapezoid coefficients over a uniform alpha grid, summing to 1.
std::vector<double> trapezoid_weights(std::size_t steps) {
  if (steps < 2) throw std::runtime_error("integrated gradients: steps must be >= 2");
  std::vector<double> w(steps, 1.0 / static_cast<double>(steps - 1));
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

void check_input(const Tensor& x) {
  if (x.shape().size() != 2)
    throw std::runtime_error("attribution expects a T x N input, got " +
                             shape_str(x.shape()));
}

}  // namespace

std::size_t resolve_target(const Model& model, const Tensor& x, std::size_t t) {
  if (model.task() == Task::Regression) return 0;
  return model.predicted_class(x, t);
}

// ---------------------------------------------------------------------------
// Integrated Gradients

Attribution integrated_gradients(const Model& model, const Tensor& x,
                                 const BaselineSpec& baseline, std::size_t steps,
                                 std::optional<std::size_t> target,
                                 std::uint64_t seed) {
  check_input(x);
  const std::size_t T = x.rows(), N = x.cols();
  const std::vector<double> base = resolve_baseline(baseline, T, N, seed);
  const std::size_t t_ref = T - 1;
  const std::size_t tgt = target ? *target : resolve_target(model, x, t_ref);

  const std::vector<double> w = trapezoid_weights(steps);
  std::vector<double> acc(T * N, 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    const double alpha = static_cast<double>(j) / static_cast<double>(steps - 1);
    std::vector<double> point(T * N);
    for (std::size_t i = 0; i < point.size(); ++i)
      point[i] = base[i] + alpha * (x.at(i) - base[i]);
    const std::vector<double> g = input_gradient(model, point, T, N, t_ref, tgt);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w[j] * g[i];
  }
  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.method = "integrated_gradients";
  attr.values.resize(T * N);
  for (std::size_t i = 0; i < acc.size(); ++i)
    attr.values[i] = (x.at(i) - base[i]) * acc[i];
  return attr;
}

// ---------------------------------------------------------------------------
// Temporal Integrated Gradients

Attribution temporal_integrated_gradients(const Model& model, const Tensor& x,
                                          const BaselineSpec& baseline,
                                          std::size_t steps, bool normalize,
                                          std::uint64_t seed) {
  check_input(x);
  if (!model.accepts_variable_length())
    throw std::runtime_error(
        "temporal_integrated_gradients needs a causal model accepting cropped "
        "series; this model requires a fixed input length");
  const std::size_t T = x.rows(), N = x.cols();
  const std::vector<double> base = resolve_baseline(baseline, T, N, seed);
  const std::vector<double> w = trapezoid_weights(steps);

  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.method = "temporal_integrated_gradients";
  attr.values.assign(T * N, 0.0);
  attr.per_time.assign(T, 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t rows = t + 1;
    // crop x[:t]; the TIG baseline keeps earlier rows and replaces only row t
    std::vector<double> crop(x.values().begin(),
                             x.values().begin() + static_cast<std::ptrdiff_t>(rows * N));
    const std::size_t tgt = resolve_target(model, Tensor(Shape{rows, N}, crop), t);

    std::vector<double> acc(N, 0.0);
    for (std::size_t j = 0; j < steps; ++j) {
      const double alpha = static_cast<double>(j) / static_cast<double>(steps - 1);
      std::vector<double> point = crop;
      for (std::size_t f = 0; f < N; ++f)
        point[t * N + f] = base[t * N + f] + alpha * (crop[t * N + f] - base[t * N + f]);
      const std::vector<double> g = input_gradient(model, point, rows, N, t, tgt);
      for (std::size_t f = 0; f < N; ++f) acc[f] += w[j] * g[t * N + f];
    }
    double row_sum = 0.0;
    for (std::size_t f = 0; f < N; ++f) {
      const double v = (crop[t * N + f] - base[t * N + f]) * acc[f];
      attr.values[t * N + f] = v;
      row_sum += v;
    }
    attr.per_time[t] = row_sum;
  }

  if (normalize) {
    double norm = 0.0;
    for (double v : attr.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : attr.per_time) v /= norm;
  }
  return attr;
}

// ---------------------------------------------------------------------------
// Time Forward Tunnel

Attribution time_forward_tunnel(const InnerMethod& inner, const Model& model,
                                const Tensor& x, bool temporal_mode) {
  check_input(x);
  const std::size_t T = x.rows(), N = x.cols();
  if (T > 1 && !model.accepts_variable_length())
    throw std::runtime_error(
        "time_forward_tunnel needs a causal model accepting cropped series");

  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.temporal = temporal_mode;
  attr.method = "time_forward_tunnel";
  attr.values.assign(temporal_mode ? T * T * N : T * N, 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t rows = t + 1;
    std::vector<double> cropv(x.values().begin(),
                              x.values().begin() + static_cast<std::ptrdiff_t>(rows * N));
    Tensor crop(Shape{rows, N}, std::move(cropv));
    const std::size_t tgt = resolve_target(model, crop, t);
    const Attribution part = inner(model, crop, tgt);
    if (part.temporal || part.steps != rows || part.features != N)
      throw std::runtime_error("time_forward_tunnel: inner method returned unexpected shape");
    if (temporal_mode) {
      for (std::size_t tp = 0; tp < rows; ++tp)
        for (std::size_t f = 0; f < N; ++f)
          attr.values[(t * T + tp) * N + f] = part.at(tp, f);
    } else {
      for (std::size_t f = 0; f < N; ++f) attr.values[t * N + f] = part.at(t, f);
    }
  }
  return attr;
}

// ---------------------------------------------------------------------------
// Occlusion

OcclusionStrategy occlusion_strategy_from_string(const std::string& name) {
  if (name == "fixed") return OcclusionStrategy::Fixed;
  if (name == "augmented") return OcclusionStrategy::Augmented;
  if (name == "temporal") return OcclusionStrategy::Temporal;
  if (name == "temporal_augmented") return OcclusionStrategy::TemporalAugmented;
  throw std::runtime_error("unknown occlusion strategy: " + name);
}

Attribution occlusion(const Model& model, const Tensor& x, OcclusionStrategy strategy,
                      const BaselineSpec& baseline, const BackgroundView& background,
                      std::size_t draws, std::optional<std::size_t> target,
                      std::uint64_t seed) {
  check_input(x);
  if (draws < 1) throw std::runtime_error("occlusion: draws must be >= 1");
  const bool augmented = strategy == OcclusionStrategy::Augmented ||
                         strategy == OcclusionStrategy::TemporalAugmented;
  const bool temporal = strategy == OcclusionStrategy::Temporal ||
                        strategy == OcclusionStrategy::TemporalAugmented;
  if (augmented && background.empty())
    throw std::runtime_error("occlusion: augmented strategies require a background set");
  if (temporal && x.rows() > 1 && !model.accepts_variable_length())
    throw std::runtime_error("occlusion: temporal strategies need a causal model");

  const std::size_t T = x.rows(), N = x.cols();
  const std::vector<double> base = resolve_baseline(
      augmented ? BaselineSpec{} : baseline, T, N, seed);
  std::mt19937_64 rng(seed);

  // bootstrap replacement: a background value of the same feature, any series
  // and any time
  auto draw_replacement = [&](std::size_t f) {
    std::uniform_int_distribution<std::size_t> pick(
        0, background.count * background.steps - 1);
    const std::size_t idx = pick(rng);
    return background.at(idx / background.steps, idx % background.steps, f);
  };

  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.method = "occlusion";
  attr.values.assign(T * N, 0.0);

  if (!temporal) {
    const std::size_t t_ref = T - 1;
    const std::size_t tgt = target ? *target : resolve_target(model, x, t_ref);
    const double ref = eval_scalar(model, x.values(), T, N, t_ref, tgt);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < N; ++f) {
        const std::size_t n_draws = augmented ? draws : 1;
        double mean_out = 0.0;
        for (std::size_t d = 0; d < n_draws; ++d) {
          std::vector<double> xv = x.values();
          xv[t * N + f] = augmented ? draw_replacement(f) : base[t * N + f];
          mean_out += eval_scalar(model, xv, T, N, t_ref, tgt);
        }
        attr.values[t * N + f] = ref - mean_out / static_cast<double>(n_draws);
      }
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t rows = t + 1;
      std::vector<double> crop(x.values().begin(),
                               x.values().begin() + static_cast<std::ptrdiff_t>(rows * N));
      const std::size_t tgt =
          target ? *target : resolve_target(model, Tensor(Shape{rows, N}, crop), t);
      const double ref = eval_scalar(model, crop, rows, N, t, tgt);
      for (std::size_t f = 0; f < N; ++f) {
        const std::size_t n_draws = augmented ? draws : 1;
        double mean_out = 0.0;
        for (std::size_t d = 0; d < n_draws; ++d) {
          std::vector<double> xv = crop;
          xv[t * N + f] = augmented ? draw_replacement(f) : base[t * N + f];
          mean_out += eval_scalar(model, xv, rows, N, t, tgt);
        }
        attr.values[t * N + f] = ref - mean_out / static_cast<double>(n_draws);
      }
    }
  }
  return attr;
}

// ---------------------------------------------------------------------------
// Local Outlier Factor

namespace {

constexpr double kLofEps = 1e-12;

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// indices of the k nearest reference points, ties broken by index
std::vector<std::size_t> knn(const std::vector<double>& q,
                             const std::vector<std::vector<double>>& X, std::size_t k,
                             std::size_t exclude) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(X.size());
  for (std::size_t j = 0; j < X.size(); ++j) {
    if (j == exclude) continue;
    d.emplace_back(euclid(q, X[j]), j);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < std::min(k, d.size()); ++j) out.push_back(d[j].second);
  return out;
}

}  // namespace

double lof_score(const std::vector<double>& x,
                 const std::vector<std::vector<double>>& reference, std::size_t k) {
  if (k < 1) throw std::runtime_error("lof: k must be >= 1");
  if (reference.size() < k + 1)
    throw std::runtime_error("lof: reference set must contain at least k+1 points");
  const std::size_t M = reference.size();

  std::vector<std::vector<std::size_t>> neigh(M);
  std::vector<double> kdist(M);
  for (std::size_t j = 0; j < M; ++j) {
    neigh[j] = knn(reference[j], reference, k, j);
    kdist[j] = euclid(reference[j], reference[neigh[j].back()]);
  }
  auto lrd_of = [&](const std::vector<double>& q, const std::vector<std::size_t>& nn) {
    double reach = 0.0;
    for (std::size_t o : nn) reach += std::max(kdist[o], euclid(q, reference[o]));
    reach /= static_cast<double>(nn.size());
    return 1.0 / std::max(reach, kLofEps);
  };

  std::vector<double> lrd(M, 0.0);
  const std::vector<std::size_t> qn = knn(x, reference, k, M /*no exclusion*/);
  double num = 0.0;
  for (std::size_t o : qn) {
    if (lrd[o] == 0.0) lrd[o] = lrd_of(reference[o], neigh[o]);
    num += lrd[o];
  }
  num /= static_cast<double>(qn.size());
  const double own = lrd_of(x, qn);
  return num / own;
}

double similarity_score(const std::vector<double>& x,
                        const std::vector<std::vector<double>>& reference,
                        std::size_t k) {
  return 1.0 / std::max(1.0, lof_score(x, reference, k));
}

// ---------------------------------------------------------------------------
// Weighted least squares helpers

namespace {

// Solves the symmetric system A x = b in place by Gaussian elimination with
// partial pivoting. Returns false if a pivot falls under the threshold.
bool solve_linear(std::vector<double> A, std::vector<double> b, std::size_t n,
                  std::vector<double>& out) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
    if (std::abs(A[piv * n + col]) < 1e-12) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(A[col * n + c], A[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = A[r * n + col] / A[col * n + col];
      for (std::size_t c = col; c < n; ++c) A[r * n + c] -= factor * A[col * n + c];
      b[r] -= factor * b[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= A[r * n + c] * out[c];
    out[r] = s / A[r * n + r];
  }
  return true;
}

// Weighted least squares via normal equations, with a ridge fallback on a
// singular system.
std::vector<double> weighted_least_squares(const std::vector<std::vector<double>>& rows,
                                           const std::vector<double>& y,
                                           const std::vector<double>& w,
                                           const std::string& who) {
  const std::size_t n = rows.size(), p = rows[0].size();
  std::vector<double> A(p * p, 0.0), b(p, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < p; ++i) {
      b[i] += w[s] * rows[s][i] * y[s];
      for (std::size_t j = i; j < p; ++j) A[i * p + j] += w[s] * rows[s][i] * rows[s][j];
    }
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) A[i * p + j] = A[j * p + i];

  std::vector<double> theta;
  if (solve_linear(A, b, p, theta)) return theta;
  std::cerr << "warning: " << who << ": singular regression system, ridge fallback\n";
  for (std::size_t i = 0; i < p; ++i) A[i * p + i] += 1e-6;
  if (!solve_linear(A, b, p, theta))
    throw std::runtime_error(who + ": regression system unsolvable even with ridge");
  return theta;
}

std::vector<std::vector<double>> background_points(const BackgroundView& bg) {
  std::vector<std::vector<double>> pts;
  pts.reserve(bg.count);
  for (std::size_t m = 0; m < bg.count; ++m) pts.push_back(bg.series(m));
  return pts;
}

std::vector<double> masked_point(const std::vector<double>& x,
                                 const std::vector<double>& base,
                                 const std::vector<std::uint8_t>& mask) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = mask[i] ? x[i] : base[i];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// LIME

Attribution lime(const Model& model, const Tensor& x, const LimeOptions& opts) {
  check_input(x);
  const std::size_t T = x.rows(), N = x.cols(), D = T * N;
  if (opts.n_samples < D + 2)
    throw std::runtime_error("lime: n_samples must be at least T*N + 2");
  if (opts.lof_kernel && opts.background.empty())
    throw std::runtime_error("lime: lof kernel requires a background set");

  const std::vector<double> base = resolve_baseline(opts.baseline, T, N, opts.seed);
  const std::size_t tgt =
      opts.target ? *opts.target : resolve_target(model, x, T - 1);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::vector<std::vector<double>> bg_pts =
      opts.lof_kernel ? background_points(opts.background)
                      : std::vector<std::vector<double>>{};
  const double sigma = 0.25 * std::sqrt(static_cast<double>(D));

  std::vector<std::vector<double>> rows;
  std::vector<double> ys, ws;
  rows.reserve(opts.n_samples);
  for (std::size_t s = 0; s < opts.n_samples; ++s) {
    std::vector<std::uint8_t> mask(D);
    for (auto& m : mask) m = unif(rng) < 0.5 ? 1 : 0;
    const std::vector<double> pt = masked_point(x.values(), base, mask);
    const double y = eval_scalar(model, pt, T, N, T - 1, tgt);

    double dist;
    if (opts.euclidean) {
      dist = euclid(pt, x.values());
    } else {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        dot += pt[i] * x.at(i);
        na += pt[i] * pt[i];
        nb += x.at(i) * x.at(i);
      }
      const double denom = std::sqrt(na) * std::sqrt(nb);
      dist = denom > 0.0 ? 1.0 - dot / denom : 1.0;
    }
    double w = std::exp(-dist * dist / (sigma * sigma));
    if (opts.lof_kernel) w *= similarity_score(pt, bg_pts, opts.lof_k);

    std::vector<double> row(D + 1, 1.0);  // intercept first
    for (std::size_t i = 0; i < D; ++i) row[1 + i] = static_cast<double>(mask[i]);
    rows.push_back(std::move(row));
    ys.push_back(y);
    ws.push_back(w);
  }

  const std::vector<double> theta = weighted_least_squares(rows, ys, ws, "lime");
  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.method = "lime";
  attr.values.assign(theta.begin() + 1, theta.end());
  return attr;
}

// ---------------------------------------------------------------------------
// KernelSHAP

Attribution kernel_shap(const Model& model, const Tensor& x,
                        const KernelShapOptions& opts) {
  check_input(x);
  const std::size_t T = x.rows(), N = x.cols(), D = T * N;
  const bool exhaustive = opts.n_samples == 0;
  if (exhaustive && D > 12)
    throw std::runtime_error("kernel_shap: exhaustive enumeration needs T*N <= 12");
  if (!exhaustive && opts.n_samples < D + 2)
    throw std::runtime_error("kernel_shap: n_samples must be at least T*N + 2");
  if (opts.lof_kernel && opts.background.empty())
    throw std::runtime_error("kernel_shap: lof kernel requires a background set");

  const std::vector<double> base = resolve_baseline(opts.baseline, T, N, opts.seed);
  const std::size_t tgt =
      opts.target ? *opts.target : resolve_target(model, x, T - 1);
  const double v_full = eval_scalar(model, x.values(), T, N, T - 1, tgt);
  const double v_empty = eval_scalar(model, base, T, N, T - 1, tgt);
  const double delta = v_full - v_empty;

  const std::vector<std::vector<double>> bg_pts =
      opts.lof_kernel ? background_points(opts.background)
                      : std::vector<std::vector<double>>{};

  auto shap_kernel_weight = [&](std::size_t s) {
    // (D-1) / (C(D,s) * s * (D-s)); log-space to stay finite for larger D
    double log_comb = 0.0;
    for (std::size_t i = 1; i <= s; ++i)
      log_comb += std::log(static_cast<double>(D - s + i)) - std::log(static_cast<double>(i));
    return std::exp(std::log(static_cast<double>(D - 1)) - log_comb -
                    std::log(static_cast<double>(s)) -
                    std::log(static_cast<double>(D - s)));
  };

  std::vector<std::vector<std::uint8_t>> masks;
  if (exhaustive) {
    for (std::size_t bits = 1; bits + 1 < (1u << D); ++bits) {
      std::vector<std::uint8_t> m(D);
      for (std::size_t i = 0; i < D; ++i) m[i] = (bits >> i) & 1u;
      masks.push_back(std::move(m));
    }
  } else {
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> size_dist(1, D - 1);
    std::vector<std::size_t> idx(D);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t s = 0; s < opts.n_samples; ++s) {
      const std::size_t sz = size_dist(rng);
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<std::uint8_t> m(D, 0);
      for (std::size_t j = 0; j < sz; ++j) m[idx[j]] = 1;
      masks.push_back(std::move(m));
    }
  }

  // Constrained weighted regression: substitute the last coefficient through
  // the efficiency constraint sum(phi) = v_full - v_empty.
  std::vector<std::vector<double>> rows;
  std::vector<double> ys, ws;
  rows.reserve(masks.size());
  for (const auto& m : masks) {
    const std::size_t sz =
        static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
    const std::vector<double> pt = masked_point(x.values(), base, m);
    const double y = eval_scalar(model, pt, T, N, T - 1, tgt);
    double w = shap_kernel_weight(sz);
    if (opts.lof_kernel) w *= similarity_score(pt, bg_pts, opts.lof_k);

    std::vector<double> row(D - 1);
    const double zd = static_cast<double>(m[D - 1]);
    for (std::size_t i = 0; i + 1 < D; ++i) row[i] = static_cast<double>(m[i]) - zd;
    rows.push_back(std::move(row));
    ys.push_back(y - v_empty - zd * delta);
    ws.push_back(w);
  }

  const std::vector<double> head = weighted_least_squares(rows, ys, ws, "kernel_shap");
  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.method = "kernel_shap";
  attr.values.assign(D, 0.0);
  double tail = delta;
  for (std::size_t i = 0; i + 1 < D; ++i) {
    attr.values[i] = head[i];
    tail -= head[i];
  }
  attr.values[D - 1] = tail;
  return attr;
}

// ---------------------------------------------------------------------------
// DynaMask-style fixed perturbation mask

namespace {

// Moving average of x over an odd window centered at t; window 1 degenerates
// to the per-feature global time-mean so the perturbation stays informative.
std::vector<double> mask_perturbation(const std::vector<double>& xv, std::size_t T,
                                      std::size_t N, std::size_t window) {
  std::vector<double> out(T * N, 0.0);
  if (window == 1) {
    for (std::size_t f = 0; f < N; ++f) {
      double m = 0.0;
      for (std::size_t t = 0; t < T; ++t) m += xv[t * N + f];
      m /= static_cast<double>(T);
      for (std::size_t t = 0; t < T; ++t) out[t * N + f] = m;
    }
    return out;
  }
  const std::size_t half = window / 2;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(T - 1, t + half);
    for (std::size_t f = 0; f < N; ++f) {
      double m = 0.0;
      for (std::size_t s = lo; s <= hi; ++s) m += xv[s * N + f];
      out[t * N + f] = m / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

// One full mask optimization at a fixed sparsity weight; returns final mask.
std::vector<double> optimize_mask(const Model& model, const Tensor& x,
                                  const Tensor& perturbation, const Tensor& ref_out,
                                  const DynamaskOptions& opts, double lambda) {
  const std::size_t D = x.size();
  Tensor m(x.shape(), std::vector<double>(D, 0.5), true);
  Tensor ones = Tensor::full(x.shape(), 1.0);
  const double anneal_epochs =
      std::max<double>(1.0, static_cast<double>(opts.epochs) / 3.0);

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lam =
        lambda * std::min(1.0, static_cast<double>(epoch + 1) / anneal_epochs);
    try {
      Tensor keep = mul(m, x);
      Tensor drop = mul(sub(ones, m), perturbation);
      Tensor out = model.forward(add(keep, drop));
      Tensor fidelity = mse_loss(reshape(out, {out.size()}), ref_out);
      Tensor loss;
      if (opts.mode == MaskMode::Preserve) {
        loss = add(fidelity, scale(abs_sum(m), lam));
      } else {
        // reward prediction shift, penalize the amount of masked data
        loss = add(scale(fidelity, -1.0), scale(abs_sum(sub(ones, m)), lam));
      }
      backward(loss);
      auto& data = m.mutable_data();
      const auto& grad = m.grad();
      for (std::size_t i = 0; i < D; ++i)
        data[i] = std::clamp(data[i] - opts.learning_rate * grad[i], 0.0, 1.0);
    } catch (const std::exception& e) {
      throw std::runtime_error("dynamask: diverged at epoch " + std::to_string(epoch) +
                               " (lr=" + std::to_string(opts.learning_rate) +
                               "): " + e.what());
    }
  }
  return m.values();
}

}  // namespace

Attribution dynamask(const Model& model, const Tensor& x, const DynamaskOptions& opts) {
  check_input(x);
  if (opts.keep_ratio <= 0.0 || opts.keep_ratio >= 1.0)
    throw std::runtime_error("dynamask: keep_ratio must be in (0,1)");
  if (opts.window < 1 || opts.window % 2 == 0)
    throw std::runtime_error("dynamask: window must be odd and >= 1");
  const std::size_t T = x.rows(), N = x.cols();

  Tensor perturbation(x.shape(), mask_perturbation(x.values(), T, N, opts.window));
  Tensor out0 = model.forward(x);
  Tensor ref_out(Shape{out0.size()}, out0.values());

  // bisection over the sparsity weight so roughly keep_ratio of mask mass
  // survives at convergence
  double lo = 0.0, hi = 1.0;
  std::vector<double> mask = optimize_mask(model, x, perturbation, ref_out, opts, hi);
  auto mask_mean = [&](const std::vector<double>& m) {
    return std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
  };
  // grow hi until the penalty actually bites
  for (int grow = 0; grow < 8 && mask_mean(mask) > opts.keep_ratio; ++grow) {
    hi *= 4.0;
    mask = optimize_mask(model, x, perturbation, ref_out, opts, hi);
  }
  for (std::size_t step = 0; step < opts.outer_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    mask = optimize_mask(model, x, perturbation, ref_out, opts, mid);
    if (mask_mean(mask) > opts.keep_ratio)
      lo = mid;
    else
      hi = mid;
  }
  mask = optimize_mask(model, x, perturbation, ref_out, opts, hi);

  Attribution attr;
  attr.steps = T;
  attr.features = N;
  attr.method = "dynamask";
  attr.values = std::move(mask);
  return attr;
}

// ---------------------------------------------------------------------------
// Non-linearities tunnel

Attribution nonlinearities_tunnel(const InnerMethod& inner, const Model& model,
                                  const std::vector<ActivationSwap>& swaps,
                                  const Tensor& x,
                                  std::optional<std::size_t> target) {
  ModelPtr swapped = model.clone_shared();
  for (const ActivationSwap& s : swaps)
    swapped = swap_activations(*swapped, s.from, s.to, s.beta);
  Attribution attr = inner(*swapped, x, target);
  attr.method = "nonlinearities_tunnel(" + attr.method + ")";
  return attr;
}

// ---------------------------------------------------------------------------
// Serialization

void save_attribution(const Attribution& attr, const std::string& csv_path) {
  std::ofstream os(csv_path);
  if (!os) throw std::runtime_error("cannot open attribution file for writing: " + csv_path);
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  if (attr.temporal) {
    os << "t,tp,f,value\n";
    for (std::size_t t = 0; t < attr.steps; ++t)
      for (std::size_t tp = 0; tp < attr.steps; ++tp)
        for (std::size_t f = 0; f < attr.features; ++f)
          os << t << "," << tp << "," << f << "," << fmt(attr.at(t, tp, f)) << "\n";
  } else {
    os << "t,f,value\n";
    for (std::size_t t = 0; t < attr.steps; ++t)
      for (std::size_t f = 0; f < attr.features; ++f)
        os << t << "," << f << "," << fmt(attr.at(t, f)) << "\n";
  }
}

Attribution load_attribution(const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw std::runtime_error("cannot open attribution file: " + csv_path);
  std::string header;
  std::getline(is, header);
  Attribution attr;
  attr.temporal = header.rfind("t,tp,", 0) == 0;
  struct RowT { std::size_t t, tp, f; double v; };
  std::vector<RowT> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    RowT r{0, 0, 0, 0.0};
    std::getline(ss, cell, ',');
    r.t = std::stoul(cell);
    if (attr.temporal) {
      std::getline(ss, cell, ',');
      r.tp = std::stoul(cell);
    }
    std::getline(ss, cell, ',');
    r.f = std::stoul(cell);
    std::getline(ss, cell, ',');
    r.v = std::stod(cell);
    rows.push_back(r);
  }
  for (const RowT& r : rows) {
    attr.steps = std::max(attr.steps, r.t + 1);
    attr.features = std::max(attr.features, r.f + 1);
  }
  attr.values.assign(attr.temporal ? attr.steps * attr.steps * attr.features
                                   : attr.steps * attr.features,
                     0.0);
  for (const RowT& r : rows) {
    if (attr.temporal)
      attr.values[(r.t * attr.steps + r.tp) * attr.features + r.f] = r.v;
    else
      attr.values[r.t * attr.features + r.f] = r.v;
  }
  attr.method = "loaded";
  return attr;
}

}  // namespace tsattr
