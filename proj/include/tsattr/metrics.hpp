#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsattr/attribution.hpp"
#include "tsattr/datasets.hpp"
#include "tsattr/model.hpp"

namespace tsattr {

struct MetricReport {
  std::map<std::string, double> values;
  std::string config_echo;  // JSON, enough to re-run bit-identically
};

// Truth-based metrics for one instance: AUP, AUR, AUPRC, ROC-AUC over binary
// truth, plus MAE/MSE/RMSE on min-max-normalized attributions.
MetricReport white_box_metrics(const Attribution& attr,
                               const std::vector<double>& truth, bool binary_truth);

enum class MaskSide { Top, Bottom };
enum class MaskAction { Remove, Keep };

struct WeightFn {
  enum class Kind { None, LimeCosine, LimeEuclidean, Lof };
  Kind kind = Kind::None;
  std::size_t lof_k = 5;
};

struct MaskPolicy {
  double fraction = 0.2;     // in (0,1]; 0 allowed as the degenerate empty mask
  MaskSide side = MaskSide::Top;
  MaskAction mode = MaskAction::Remove;
  BaselineSpec baseline;
  double noise_sigma = 0.0;
  std::size_t draws = 1;
  WeightFn weight_fn;
  BackgroundView background;  // for Lof weights
  std::uint64_t seed = 0;
};

// Cells selected by the policy (flat T*N indices), deterministic tie-breaking
// by (t, f) lexicographic order. Exposed for the complementarity property.
std::vector<std::size_t> policy_masked_cells(const MaskPolicy& policy,
                                             const std::vector<double>& attr,
                                             std::size_t cells);

// Perturbed input for one draw, shared by every black-box metric.
std::vector<double> policy_perturb(const MaskPolicy& policy, const Tensor& x,
                                   const std::vector<double>& attr,
                                   std::size_t draw_index);

double black_box_metric(const std::string& kind, const Model& model, const Tensor& x,
                        const Attribution& attr, const MaskPolicy& policy,
                        std::optional<double> label = {},
                        double accuracy_threshold = 0.5);

// Batch-averaging wrapper over per-instance scores.
double black_box_metric_batch(const std::string& kind, const Model& model,
                              const SeriesBatch& data,
                              const std::vector<Attribution>& attrs,
                              const MaskPolicy& policy,
                              double accuracy_threshold = 0.5);

using AttributionFn = std::function<Attribution(const Model&, const Tensor&)>;

// Stability score: max over sampled perturbations z of
// ||attr(x) - attr(z)||_2 / ||x - z||_2 with z uniform in the eps-ball.
double lipschitz_max(const AttributionFn& method, const Model& model, const Tensor& x,
                     double radius, std::size_t n_samples, std::uint64_t seed);

const std::vector<std::string>& black_box_metric_names();

void save_metric_report(const MetricReport& report, const std::string& json_path);

}  // namespace tsattr
