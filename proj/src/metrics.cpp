#include "tsattr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace tsattr {

using nlohmann::json;

namespace {

constexpr double kProbClamp = 1e-12;

std::vector<double> min_max_normalize(const std::vector<double>& v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  if (*mx - *mn <= 0.0) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *mn) / (*mx - *mn);
  return out;
}

// permutation sorted by (value desc, index asc); one total order shared by
// top and bottom selections so complements line up exactly
std::vector<std::size_t> ranking(const std::vector<double>& v) {
  std::vector<std::size_t> perm(v.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  });
  return perm;
}

std::vector<double> softmax(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - mx);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

MetricReport white_box_metrics(const Attribution& attr,
                               const std::vector<double>& truth, bool binary_truth) {
  if (attr.values.size() != truth.size())
    throw std::runtime_error("white_box_metrics: attribution and truth sizes differ (" +
                             std::to_string(attr.values.size()) + " vs " +
                             std::to_string(truth.size()) + ")");
  const std::vector<double> norm = min_max_normalize(attr.values);

  MetricReport report;
  double mae = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    const double d = norm[i] - truth[i];
    mae += std::abs(d);
    mse += d * d;
  }
  mae /= static_cast<double>(norm.size());
  mse /= static_cast<double>(norm.size());
  report.values["mae"] = mae;
  report.values["mse"] = mse;
  report.values["rmse"] = std::sqrt(mse);

  if (binary_truth) {
    std::size_t positives = 0;
    for (double t : truth) {
      if (t != 0.0 && t != 1.0)
        throw std::runtime_error("white_box_metrics: binary truth has non-binary values");
      positives += t == 1.0;
    }
    if (positives == 0 || positives == truth.size())
      throw std::runtime_error(
          "white_box_metrics: AUPRC/ROC-AUC undefined for all-zero or all-one truth");
    const std::size_t n = truth.size();

    // AUP/AUR on a 100-point threshold grid strictly inside (0,1)
    double aup = 0.0, aur = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double tau = static_cast<double>(k + 1) / 101.0;
      std::size_t tp = 0, fp = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (norm[i] >= tau) {
          if (truth[i] == 1.0) ++tp; else ++fp;
        }
      }
      aup += (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
      aur += static_cast<double>(tp) / static_cast<double>(positives);
    }
    report.values["aup"] = aup / 100.0;
    report.values["aur"] = aur / 100.0;

    // AUPRC as average precision over the ranking
    const std::vector<std::size_t> perm = ranking(norm);
    double ap = 0.0;
    std::size_t tp = 0;
    for (std::size_t rank = 0; rank < n; ++rank) {
      if (truth[perm[rank]] == 1.0) {
        ++tp;
        ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
      }
    }
    report.values["auprc"] = ap / static_cast<double>(positives);

    // ROC-AUC via rank statistics with average ranks on ties
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return norm[a] < norm[b]; });
    std::vector<double> rank_of(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && norm[order[j + 1]] == norm[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t r = i; r <= j; ++r) rank_of[order[r]] = avg;
      i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t idx = 0; idx < n; ++idx)
      if (truth[idx] == 1.0) pos_rank_sum += rank_of[idx];
    const double pos = static_cast<double>(positives);
    const double negs = static_cast<double>(n - positives);
    report.values["roc_auc"] = (pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * negs);
  }

  report.config_echo = json{{"family", "white_box"}, {"binary", binary_truth}}.dump();
  return report;
}

// ---------------------------------------------------------------------------
// Black-box metrics

std::vector<std::size_t> policy_masked_cells(const MaskPolicy& policy,
                                             const std::vector<double>& attr,
                                             std::size_t cells) {
  if (policy.fraction < 0.0 || policy.fraction > 1.0)
    throw std::runtime_error("mask policy: fraction must be in [0,1]");
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(policy.fraction * static_cast<double>(cells)));
  if (policy.fraction > 0.0 && k == 0)
    throw std::runtime_error("mask policy: selection is empty");
  const std::vector<std::size_t> perm = ranking(attr);

  std::vector<std::size_t> selected;
  if (policy.side == MaskSide::Top)
    selected.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  else
    selected.assign(perm.end() - static_cast<std::ptrdiff_t>(k), perm.end());

  std::vector<std::size_t> masked;
  if (policy.mode == MaskAction::Remove) {
    masked = selected;
  } else {
    std::vector<std::uint8_t> keep(cells, 0);
    for (std::size_t i : selected) keep[i] = 1;
    for (std::size_t i = 0; i < cells; ++i)
      if (!keep[i]) masked.push_back(i);
  }
  std::sort(masked.begin(), masked.end());
  return masked;
}

std::vector<double> policy_perturb(const MaskPolicy& policy, const Tensor& x,
                                   const std::vector<double>& attr,
                                   std::size_t draw_index) {
  const std::size_t T = x.rows(), N = x.cols();
  const std::vector<std::size_t> masked = policy_masked_cells(policy, attr, T * N);
  // per-draw substream so parallel draws stay order-independent
  const std::uint64_t draw_seed = policy.seed + 1000003ULL * (draw_index + 1);
  const std::vector<double> base = resolve_baseline(policy.baseline, T, N, draw_seed);
  std::mt19937_64 rng(draw_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out = x.values();
  for (std::size_t i : masked) {
    out[i] = base[i];
    if (policy.noise_sigma > 0.0) out[i] += policy.noise_sigma * noise(rng);
  }
  return out;
}

const std::vector<std::string>& black_box_metric_names() {
  static const std::vector<std::string> names = {
      "accuracy", "comprehensiveness", "cross_entropy", "log_odds",
      "mae",      "mse",               "sufficiency"};
  return names;
}

namespace {

double draw_weight(const MaskPolicy& policy, const std::vector<double>& original,
                   const std::vector<double>& perturbed) {
  switch (policy.weight_fn.kind) {
    case WeightFn::Kind::None:
      return 1.0;
    case WeightFn::Kind::LimeEuclidean:
    case WeightFn::Kind::LimeCosine: {
      double dist;
      if (policy.weight_fn.kind == WeightFn::Kind::LimeEuclidean) {
        double s = 0.0;
        for (std::size_t i = 0; i < original.size(); ++i) {
          const double d = original[i] - perturbed[i];
          s += d * d;
        }
        dist = std::sqrt(s);
      } else {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < original.size(); ++i) {
          dot += original[i] * perturbed[i];
          na += original[i] * original[i];
          nb += perturbed[i] * perturbed[i];
        }
        const double denom = std::sqrt(na) * std::sqrt(nb);
        dist = denom > 0.0 ? 1.0 - dot / denom : 1.0;
      }
      const double sigma = 0.25 * std::sqrt(static_cast<double>(original.size()));
      return std::exp(-dist * dist / (sigma * sigma));
    }
    case WeightFn::Kind::Lof: {
      if (policy.background.empty())
        throw std::runtime_error("mask policy: lof weight requires a background set");
      std::vector<std::vector<double>> pts;
      pts.reserve(policy.background.count);
      for (std::size_t m = 0; m < policy.background.count; ++m)
        pts.push_back(policy.background.series(m));
      return similarity_score(perturbed, pts, policy.weight_fn.lof_k);
    }
  }
  throw std::runtime_error("invalid weight function");
}

}  // namespace

double black_box_metric(const std::string& kind, const Model& model, const Tensor& x,
                        const Attribution& attr, const MaskPolicy& policy,
                        std::optional<double> label, double accuracy_threshold) {
  if (std::find(black_box_metric_names().begin(), black_box_metric_names().end(),
                kind) == black_box_metric_names().end())
    throw std::runtime_error("unknown black-box metric: " + kind);
  if (policy.draws < 1) throw std::runtime_error("mask policy: draws must be >= 1");
  if (attr.temporal)
    throw std::runtime_error("black-box metrics expect a static T x N attribution");
  const std::size_t T = x.rows();

  const bool prob_metric = kind == "accuracy" || kind == "comprehensiveness" ||
                           kind == "cross_entropy" || kind == "log_odds" ||
                           kind == "sufficiency";
  if (prob_metric && model.task() == Task::Regression)
    throw std::runtime_error("probability metric '" + kind +
                             "' is undefined for regression models");

  const std::vector<double> orig_out = model.predict_step(x, T - 1);
  const std::vector<double> orig_prob =
      prob_metric ? softmax(orig_out) : std::vector<double>{};
  const std::size_t pred_class =
      prob_metric ? static_cast<std::size_t>(std::max_element(orig_prob.begin(),
                                                              orig_prob.end()) -
                                             orig_prob.begin())
                  : 0;

  double total = 0.0, weight_sum = 0.0;
  for (std::size_t d = 0; d < policy.draws; ++d) {
    const std::vector<double> pert = policy_perturb(policy, x, attr.values, d);
    const std::vector<double> pert_out =
        model.predict_step(Tensor(x.shape(), pert), T - 1);
    const double w = draw_weight(policy, x.values(), pert);

    double value = 0.0;
    if (kind == "comprehensiveness" || kind == "sufficiency") {
      const std::vector<double> p = softmax(pert_out);
      value = orig_prob[pred_class] - p[pred_class];
    } else if (kind == "cross_entropy") {
      const std::vector<double> p = softmax(pert_out);
      for (std::size_t c = 0; c < p.size(); ++c)
        value -= orig_prob[c] * std::log(clamp_prob(p[c]));
    } else if (kind == "log_odds") {
      const std::vector<double> p = softmax(pert_out);
      value = std::log(clamp_prob(p[pred_class])) -
              std::log(clamp_prob(orig_prob[pred_class]));
    } else if (kind == "accuracy") {
      const std::vector<double> p = softmax(pert_out);
      std::size_t pert_class;
      if (p.size() == 2)
        pert_class = p[1] >= accuracy_threshold ? 1 : 0;
      else
        pert_class = static_cast<std::size_t>(
            std::max_element(p.begin(), p.end()) - p.begin());
      const std::size_t ref = label ? static_cast<std::size_t>(*label) : pred_class;
      value = pert_class == ref ? 1.0 : 0.0;
    } else {  // mae / mse on raw outputs
      double s = 0.0;
      for (std::size_t c = 0; c < pert_out.size(); ++c) {
        const double diff = orig_out[c] - pert_out[c];
        s += kind == "mae" ? std::abs(diff) : diff * diff;
      }
      value = s / static_cast<double>(pert_out.size());
    }
    total += w * value;
    weight_sum += w;
  }
  if (weight_sum <= 0.0) throw std::runtime_error("mask policy: weights sum to zero");
  return total / weight_sum;
}

double black_box_metric_batch(const std::string& kind, const Model& model,
                              const SeriesBatch& data,
                              const std::vector<Attribution>& attrs,
                              const MaskPolicy& policy, double accuracy_threshold) {
  if (attrs.size() != data.batch)
    throw std::runtime_error("black_box_metric_batch: one attribution per series required");
  double total = 0.0;
  for (std::size_t b = 0; b < data.batch; ++b) {
    std::optional<double> label;
    if (data.label_kind == LabelKind::Static)
      label = data.label_at(b);
    else if (data.label_kind == LabelKind::Temporal)
      label = data.label_at(b, data.steps - 1);
    MaskPolicy p = policy;
    p.seed = policy.seed + b;
    total += black_box_metric(kind, model, data.series(b), attrs[b], p, label,
                              accuracy_threshold);
  }
  return total / static_cast<double>(data.batch);
}

double lipschitz_max(const AttributionFn& method, const Model& model, const Tensor& x,
                     double radius, std::size_t n_samples, std::uint64_t seed) {
  if (radius <= 0.0) throw std::runtime_error("lipschitz_max: radius must be positive");
  if (n_samples < 1) throw std::runtime_error("lipschitz_max: n_samples must be >= 1");
  const Attribution base = method(model, x);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-radius, radius);

  double worst = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> zv;
    double dist = 0.0;
    do {  // resample the degenerate z == x case
      zv = x.values();
      dist = 0.0;
      for (double& v : zv) {
        const double d = unif(rng);
        v += d;
        dist += d * d;
      }
      dist = std::sqrt(dist);
    } while (dist == 0.0);
    const Attribution other = method(model, Tensor(x.shape(), zv));
    double diff = 0.0;
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      const double d = base.values[i] - other.values[i];
      diff += d * d;
    }
    worst = std::max(worst, std::sqrt(diff) / dist);
  }
  return worst;
}

void save_metric_report(const MetricReport& report, const std::string& json_path) {
  json j{{"metrics", report.values}, {"config", json::parse(report.config_echo)}};
  std::ofstream os(json_path);
  if (!os) throw std::runtime_error("cannot open metric report for writing: " + json_path);
  os << j.dump(2) << "\n";
}

}  // namespace tsattr
