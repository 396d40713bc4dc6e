#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tsattr/model.hpp"
#include "tsattr/tensor.hpp"

namespace tsattr {

// Per-cell saliency, T x N, or T x T x N in temporal mode where values
// (t, t', .) attribute the output at time t to inputs at time t' <= t.
struct Attribution {
  bool temporal = false;
  std::size_t steps = 0, features = 0;
  std::vector<double> values;
  std::vector<double> per_time;  // normalized per-t aggregate (TIG only)
  std::string method;

  double at(std::size_t t, std::size_t f) const { return values[t * features + f]; }
  double at(std::size_t t, std::size_t tp, std::size_t f) const {
    return values[(t * steps + tp) * features + f];
  }
};

// Read-only view over a background set of M series, each T x N.
struct BackgroundView {
  const std::vector<double>* data = nullptr;
  std::size_t count = 0, steps = 0, features = 0;

  bool empty() const { return data == nullptr || count == 0; }
  double at(std::size_t m, std::size_t t, std::size_t f) const {
    return (*data)[(m * steps + t) * features + f];
  }
  std::vector<double> series(std::size_t m) const;
};

struct BaselineSpec {
  enum class Kind { Zeros, Constant, Sample };
  Kind kind = Kind::Zeros;
  double constant = 0.0;
  BackgroundView background;  // required for Sample
};

// Baseline series resolved against an input of shape T x N. Sample picks one
// background series with the given rng seed.
std::vector<double> resolve_baseline(const BaselineSpec& spec, std::size_t steps,
                                     std::size_t features, std::uint64_t seed);

// Scalar target index into the output row: argmax of the model's prediction at
// time t for classification, output 0 for regression.
std::size_t resolve_target(const Model& model, const Tensor& x, std::size_t t);

Attribution integrated_gradients(const Model& model, const Tensor& x,
                                 const BaselineSpec& baseline, std::size_t steps = 64,
                                 std::optional<std::size_t> target = {},
                                 std::uint64_t seed = 0);

Attribution temporal_integrated_gradients(const Model& model, const Tensor& x,
                                          const BaselineSpec& baseline,
                                          std::size_t steps = 64, bool normalize = true,
                                          std::uint64_t seed = 0);

// Any attribution method usable inside a tunnel; the target, when set, must be
// honored so the tunnel can pin it to the model's own prediction at time t.
using InnerMethod = std::function<Attribution(const Model&, const Tensor&,
                                              std::optional<std::size_t>)>;

Attribution time_forward_tunnel(const InnerMethod& inner, const Model& model,
                                const Tensor& x, bool temporal_mode = false);

enum class OcclusionStrategy { Fixed, Augmented, Temporal, TemporalAugmented };

OcclusionStrategy occlusion_strategy_from_string(const std::string& name);

Attribution occlusion(const Model& model, const Tensor& x, OcclusionStrategy strategy,
                      const BaselineSpec& baseline, const BackgroundView& background,
                      std::size_t draws = 25, std::optional<std::size_t> target = {},
                      std::uint64_t seed = 0);

// Standard LOF of a query point against a reference set, k nearest neighbors.
double lof_score(const std::vector<double>& x,
                 const std::vector<std::vector<double>>& reference, std::size_t k);

double similarity_score(const std::vector<double>& x,
                        const std::vector<std::vector<double>>& reference,
                        std::size_t k);  // 1 / max(1, LOF)

enum class SurrogateKernel { Distance, Shapley, Lof };

struct LimeOptions {
  std::size_t n_samples = 1000;
  bool lof_kernel = false;       // multiply the distance kernel by SimilarityScore
  bool euclidean = false;        // cosine distance by default
  BaselineSpec baseline;
  BackgroundView background;     // required for lof_kernel and Sample baselines
  std::size_t lof_k = 5;
  std::optional<std::size_t> target;
  std::uint64_t seed = 0;
};

Attribution lime(const Model& model, const Tensor& x, const LimeOptions& opts);

struct KernelShapOptions {
  std::size_t n_samples = 0;     // 0: exhaustive (requires T*N <= 12)
  bool lof_kernel = false;       // multiply the Shapley kernel by SimilarityScore
  BaselineSpec baseline;
  BackgroundView background;
  std::size_t lof_k = 5;
  std::optional<std::size_t> target;
  std::uint64_t seed = 0;
};

Attribution kernel_shap(const Model& model, const Tensor& x,
                        const KernelShapOptions& opts);

enum class MaskMode { Preserve, Delete };

struct DynamaskOptions {
  double keep_ratio = 0.5;
  std::size_t epochs = 200;
  double learning_rate = 0.1;
  std::size_t window = 5;        // odd; 1 means global time-mean perturbation
  MaskMode mode = MaskMode::Preserve;
  std::size_t outer_steps = 10;  // bisection steps calibrating the sparsity weight
  std::optional<std::size_t> target;
};

Attribution dynamask(const Model& model, const Tensor& x, const DynamaskOptions& opts);

struct ActivationSwap {
  Activation from = Activation::ReLU;
  Activation to = Activation::Softplus;
  double beta = 1.0;
};

Attribution nonlinearities_tunnel(const InnerMethod& inner, const Model& model,
                                  const std::vector<ActivationSwap>& swaps,
                                  const Tensor& x,
                                  std::optional<std::size_t> target = {});

void save_attribution(const Attribution& attr, const std::string& csv_path);
Attribution load_attribution(const std::string& csv_path);

}  // namespace tsattr
