#include "tsattr/datasets.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tsattr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Tensor SeriesBatch::series(std::size_t b) const {
  if (b >= batch) throw std::runtime_error("series index out of range");
  const std::size_t n = steps * features;
  std::vector<double> d(inputs.begin() + static_cast<std::ptrdiff_t>(b * n),
                        inputs.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
  return Tensor(Shape{steps, features}, std::move(d));
}

double SeriesBatch::label_at(std::size_t b, std::size_t t) const {
  if (label_kind == LabelKind::None) throw std::runtime_error("batch has no labels");
  if (label_kind == LabelKind::Static) return labels.at(b);
  return labels.at(b * steps + t);
}

std::size_t SaliencyTruth::instance_size() const {
  return temporal ? steps * steps * features : steps * features;
}

std::vector<double> SaliencyTruth::instance(std::size_t b) const {
  const std::size_t n = instance_size();
  return std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(b * n),
                             values.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
}

namespace {

// Largest |eigenvalue| of the companion matrix of the recurrence coefficients,
// by power iteration. Used for both AR stationarity and Hawkes stability.
double spectral_radius(const std::vector<double>& m, std::size_t k) {
  std::vector<double> v(k, 1.0), w(k);
  double norm = 1.0;
  for (int iter = 0; iter < 500; ++iter) {
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += m[i * k + j] * v[j];
      w[i] = s;
    }
    norm = 0.0;
    for (double x : w) norm = std::max(norm, std::abs(x));
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < k; ++i) v[i] = w[i] / norm;
  }
  return norm;
}

double ar_spectral_radius(const std::vector<double>& ar) {
  const std::size_t p = ar.size();
  if (p == 0) return 0.0;
  std::vector<double> companion(p * p, 0.0);
  for (std::size_t j = 0; j < p; ++j) companion[j] = ar[j];
  for (std::size_t i = 1; i < p; ++i) companion[i * p + (i - 1)] = 1.0;
  return spectral_radius(companion, p);
}

}  // namespace

// ---------------------------------------------------------------------------
// ARMA

ArmaDataset generate_arma(const ArmaSpec& spec) {
  if (spec.batch < 1 || spec.steps < 1 || spec.features < 1)
    throw std::runtime_error("arma: B, T, N must all be >= 1");
  if (spec.t_begin >= spec.t_end || spec.t_end > spec.steps)
    throw std::runtime_error("arma: salient window out of bounds or empty");
  if (spec.salient_features.empty())
    throw std::runtime_error("arma: empty salient feature set");
  if (ar_spectral_radius(spec.ar) >= 1.0 - 1e-9)
    throw std::runtime_error("arma: non-stationary AR coefficients");

  const std::size_t B = spec.batch, T = spec.steps, N = spec.features;
  const std::size_t p = spec.ar.size(), q = spec.ma.size();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  ArmaDataset out;
  out.data.batch = B;
  out.data.steps = T;
  out.data.features = N;
  out.data.inputs.assign(B * T * N, 0.0);
  // burn-in so the window does not see the zero-initialized transient
  const std::size_t burn = 50;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < N; ++i) {
      std::vector<double> x(burn + T, 0.0), eps(burn + T, 0.0);
      for (std::size_t t = 0; t < burn + T; ++t) {
        eps[t] = noise(rng);
        double v = eps[t];
        for (std::size_t j = 0; j < p && j < t; ++j) v += spec.ar[j] * x[t - 1 - j];
        for (std::size_t j = 0; j < q && j < t; ++j) v += spec.ma[j] * eps[t - 1 - j];
        x[t] = v;
      }
      for (std::size_t t = 0; t < T; ++t)
        out.data.inputs[(b * T + t) * N + i] = x[burn + t];
    }
  }

  out.truth.temporal = false;
  out.truth.batch = B;
  out.truth.steps = T;
  out.truth.features = N;
  out.truth.kind = SaliencyTruth::Kind::Binary;
  out.truth.values.assign(B * T * N, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = spec.t_begin; t < spec.t_end; ++t)
      for (std::size_t f : spec.salient_features)
        out.truth.values[(b * T + t) * N + f] = 1.0;

  out.regressor = std::make_shared<WindowSquareRegressor>(N, spec.t_begin, spec.t_end,
                                                          spec.salient_features);
  return out;
}

// ---------------------------------------------------------------------------
// HMM

HmmDataset generate_hmm(const HmmSpec& spec) {
  if (spec.steps < 2) throw std::runtime_error("hmm: T must be >= 2");
  if (spec.batch < 1) throw std::runtime_error("hmm: B must be >= 1");
  if (spec.stay_prob <= 0.0 || spec.stay_prob >= 1.0)
    throw std::runtime_error("hmm: stay probability must be in (0,1)");
  const std::size_t B = spec.batch, T = spec.steps, N = 3;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  HmmDataset out;
  out.data.batch = B;
  out.data.steps = T;
  out.data.features = N;
  out.data.inputs.assign(B * T * N, 0.0);
  out.data.labels.assign(B * T, 0.0);
  out.data.label_kind = LabelKind::Temporal;
  out.truth = {};
  out.truth.temporal = false;
  out.truth.batch = B;
  out.truth.steps = T;
  out.truth.features = N;
  out.truth.kind = SaliencyTruth::Kind::Binary;
  out.truth.values.assign(B * T * N, 0.0);
  out.states.assign(B * T, 0);

  for (std::size_t b = 0; b < B; ++b) {
    int state = unif(rng) < 0.5 ? 0 : 1;
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0 && unif(rng) >= spec.stay_prob) state = 1 - state;
      out.states[b * T + t] = state;
      const std::size_t salient = 1 + static_cast<std::size_t>(state);
      const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < N; ++i) {
        double v = (i == salient) ? sign + spec.emission_sigma * noise(rng)
                                  : noise(rng);
        out.data.inputs[(b * T + t) * N + i] = v;
      }
      const double sal_val = out.data.inputs[(b * T + t) * N + salient];
      out.data.labels[b * T + t] = sal_val > 0.0 ? 1.0 : 0.0;
      out.truth.values[(b * T + t) * N + salient] = 1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hawkes

void HawkesParams::validate() const {
  const std::size_t K = types;
  if (K < 1) throw std::runtime_error("hawkes: need at least one event type");
  if (mu.size() != K || alpha.size() != K * K || beta.size() != K * K)
    throw std::runtime_error("hawkes: parameter sizes do not match type count");
  for (double m : mu)
    if (m <= 0.0) throw std::runtime_error("hawkes: mu must be positive");
  for (double a : alpha)
    if (a < 0.0) throw std::runtime_error("hawkes: alpha must be non-negative");
  for (double b : beta)
    if (b <= 0.0) throw std::runtime_error("hawkes: beta must be positive");
  if (horizon <= 0.0) throw std::runtime_error("hawkes: horizon must be positive");
  std::vector<double> ratio(K * K);
  for (std::size_t i = 0; i < K * K; ++i) ratio[i] = alpha[i] / beta[i];
  if (spectral_radius(ratio, K) >= 1.0)
    throw std::runtime_error("hawkes: stationarity violated (spectral radius of alpha/beta >= 1)");
}

namespace {

// Intensity with a choice of boundary: strict (< t) for queries, inclusive
// (<= t) for the thinning upper bound right after an event.
double intensity_impl(const HawkesParams& p, const std::vector<Event>& history,
                      double t, std::size_t k, bool inclusive) {
  double lam = p.mu[k];
  const std::size_t K = p.types;
  for (const Event& e : history) {
    if (inclusive ? e.time > t : e.time >= t) break;
    lam += p.alpha[k * K + e.type] * std::exp(-p.beta[k * K + e.type] * (t - e.time));
  }
  return lam;
}

}  // namespace

double hawkes_intensity(const HawkesParams& params, const std::vector<Event>& history,
                        double t, std::size_t k) {
  params.validate();
  if (k >= params.types) throw std::runtime_error("hawkes: type index out of range");
  if (t < 0.0) throw std::runtime_error("hawkes: query time must be >= 0");
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].time < history[i - 1].time)
      throw std::runtime_error("hawkes: history not sorted ascending");
  return intensity_impl(params, history, t, k, /*inclusive=*/false);
}

HawkesDataset generate_hawkes(const HawkesParams& params, std::size_t batch,
                              std::size_t bins, std::uint64_t seed) {
  params.validate();
  if (batch < 1 || bins < 1) throw std::runtime_error("hawkes: batch and bins must be >= 1");
  const std::size_t K = params.types;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  HawkesDataset out;
  out.sequences.resize(batch);
  out.data.batch = batch;
  out.data.steps = bins;
  out.data.features = K;
  out.data.inputs.assign(batch * bins * K, 0.0);
  out.truth.temporal = true;
  out.truth.batch = batch;
  out.truth.steps = bins;
  out.truth.features = K;
  out.truth.kind = SaliencyTruth::Kind::Real;
  out.truth.values.assign(batch * bins * bins * K, 0.0);

  const double bin_width = params.horizon / static_cast<double>(bins);

  for (std::size_t b = 0; b < batch; ++b) {
    // Ogata thinning: between events the intensity only decays, so its value
    // just after the current time bounds it until the next event.
    std::vector<Event>& events = out.sequences[b];
    double t = 0.0;
    while (true) {
      double bar = 0.0;
      for (std::size_t k = 0; k < K; ++k)
        bar += intensity_impl(params, events, t, k, /*inclusive=*/true);
      const double w = -std::log(1.0 - unif(rng)) / bar;
      t += w;
      if (t >= params.horizon) break;
      const double u = unif(rng) * bar;
      double acc = 0.0;
      std::size_t accepted_type = K;
      for (std::size_t k = 0; k < K; ++k) {
        acc += intensity_impl(params, events, t, k, /*inclusive=*/false);
        if (u < acc) {
          accepted_type = k;
          break;
        }
      }
      if (accepted_type < K) {
        assert(u <= acc);  // acceptance uses the exact intensity
        events.push_back({t, accepted_type});
      }
    }

    // discretize to per-bin counts
    for (const Event& e : events) {
      std::size_t bin = std::min(static_cast<std::size_t>(e.time / bin_width), bins - 1);
      out.data.inputs[(b * bins + bin) * K + e.type] += 1.0;
    }

    // temporal truth: for each event, the normalized excitation contribution
    // of each strictly earlier bin's events
    for (std::size_t e = 0; e < events.size(); ++e) {
      const std::size_t bin_e =
          std::min(static_cast<std::size_t>(events[e].time / bin_width), bins - 1);
      const std::size_t ke = events[e].type;
      double total_excitation = 0.0;
      std::vector<double> contrib(e, 0.0);
      for (std::size_t j = 0; j < e; ++j) {
        const std::size_t kj = events[j].type;
        contrib[j] = params.alpha[ke * K + kj] *
                     std::exp(-params.beta[ke * K + kj] * (events[e].time - events[j].time));
        total_excitation += contrib[j];
      }
      if (total_excitation <= 0.0) continue;  // no prior influence: all-zero row
      const double lam = params.mu[ke] + total_excitation;
      const double share = total_excitation / lam;  // (lambda* - mu) / lambda*
      for (std::size_t j = 0; j < e; ++j) {
        const std::size_t bin_j =
            std::min(static_cast<std::size_t>(events[j].time / bin_width), bins - 1);
        if (bin_j >= bin_e) continue;  // same-bin influence has no causal slot
        out.truth.values[((b * bins + bin_e) * bins + bin_j) * K + events[j].type] +=
            contrib[j] / total_excitation * share;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Directory serialization

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void save_dataset(const SeriesBatch& data, const SaliencyTruth& truth,
                  const std::string& meta_json, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "inputs.csv");
    os << "b,t";
    for (std::size_t f = 0; f < data.features; ++f) os << ",f" << f;
    os << "\n";
    for (std::size_t b = 0; b < data.batch; ++b)
      for (std::size_t t = 0; t < data.steps; ++t) {
        os << b << "," << t;
        for (std::size_t f = 0; f < data.features; ++f)
          os << "," << format_double(data.inputs[(b * data.steps + t) * data.features + f]);
        os << "\n";
      }
  }
  {
    std::ofstream os(fs::path(dir) / "labels.csv");
    if (data.label_kind == LabelKind::Static) {
      os << "b,label\n";
      for (std::size_t b = 0; b < data.batch; ++b)
        os << b << "," << format_double(data.labels[b]) << "\n";
    } else if (data.label_kind == LabelKind::Temporal) {
      os << "b,t,label\n";
      for (std::size_t b = 0; b < data.batch; ++b)
        for (std::size_t t = 0; t < data.steps; ++t)
          os << b << "," << t << "," << format_double(data.labels[b * data.steps + t]) << "\n";
    } else {
      os << "b,label\n";
    }
  }
  {
    std::ofstream os(fs::path(dir) / "truth.csv");
    if (truth.temporal) {
      os << "b,t,tp,f,value\n";
      for (std::size_t b = 0; b < truth.batch; ++b)
        for (std::size_t t = 0; t < truth.steps; ++t)
          for (std::size_t tp = 0; tp < truth.steps; ++tp)
            for (std::size_t f = 0; f < truth.features; ++f)
              os << b << "," << t << "," << tp << "," << f << ","
                 << format_double(truth.values[((b * truth.steps + t) * truth.steps + tp) *
                                                   truth.features + f])
                 << "\n";
    } else {
      os << "b,t,f,value\n";
      for (std::size_t b = 0; b < truth.batch; ++b)
        for (std::size_t t = 0; t < truth.steps; ++t)
          for (std::size_t f = 0; f < truth.features; ++f)
            os << b << "," << t << "," << f << ","
               << format_double(truth.values[(b * truth.steps + t) * truth.features + f])
               << "\n";
    }
  }
  {
    json meta = json::parse(meta_json);
    meta["batch"] = data.batch;
    meta["steps"] = data.steps;
    meta["features"] = data.features;
    meta["label_kind"] = data.label_kind == LabelKind::Static
                             ? "static"
                             : (data.label_kind == LabelKind::Temporal ? "temporal" : "none");
    meta["truth_temporal"] = truth.temporal;
    meta["truth_kind"] = truth.kind == SaliencyTruth::Kind::Binary ? "binary" : "real";
    std::ofstream os(fs::path(dir) / "meta.json");
    os << meta.dump(2) << "\n";
  }
}

LoadedDataset load_dataset(const std::string& dir) {
  LoadedDataset out;
  const fs::path root(dir);
  if (!fs::exists(root / "meta.json"))
    throw std::runtime_error("dataset directory missing meta.json: " + dir);
  {
    std::ifstream is(root / "meta.json");
    std::stringstream ss;
    ss << is.rdbuf();
    out.meta_json = ss.str();
  }
  const json meta = json::parse(out.meta_json);
  out.data.batch = meta.at("batch").get<std::size_t>();
  out.data.steps = meta.at("steps").get<std::size_t>();
  out.data.features = meta.at("features").get<std::size_t>();
  const std::string lk = meta.at("label_kind").get<std::string>();
  out.data.label_kind = lk == "static" ? LabelKind::Static
                                       : (lk == "temporal" ? LabelKind::Temporal : LabelKind::None);
  out.truth.temporal = meta.at("truth_temporal").get<bool>();
  out.truth.kind = meta.at("truth_kind").get<std::string>() == "binary"
                       ? SaliencyTruth::Kind::Binary
                       : SaliencyTruth::Kind::Real;
  out.truth.batch = out.data.batch;
  out.truth.steps = out.data.steps;
  out.truth.features = out.data.features;

  out.data.inputs.assign(out.data.batch * out.data.steps * out.data.features, 0.0);
  {
    std::ifstream is(root / "inputs.csv");
    if (!is) throw std::runtime_error("missing inputs.csv in " + dir);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      const std::size_t b = std::stoul(cells[0]), t = std::stoul(cells[1]);
      for (std::size_t f = 0; f < out.data.features; ++f)
        out.data.inputs[(b * out.data.steps + t) * out.data.features + f] =
            std::stod(cells[2 + f]);
    }
  }
  if (out.data.label_kind != LabelKind::None) {
    std::ifstream is(root / "labels.csv");
    if (!is) throw std::runtime_error("missing labels.csv in " + dir);
    out.data.labels.assign(out.data.label_kind == LabelKind::Static
                               ? out.data.batch
                               : out.data.batch * out.data.steps,
                           0.0);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (out.data.label_kind == LabelKind::Static)
        out.data.labels[std::stoul(cells[0])] = std::stod(cells[1]);
      else
        out.data.labels[std::stoul(cells[0]) * out.data.steps + std::stoul(cells[1])] =
            std::stod(cells[2]);
    }
  }
  {
    std::ifstream is(root / "truth.csv");
    if (!is) throw std::runtime_error("missing truth.csv in " + dir);
    const std::size_t n = out.truth.temporal
                              ? out.truth.batch * out.truth.steps * out.truth.steps *
                                    out.truth.features
                              : out.truth.batch * out.truth.steps * out.truth.features;
    out.truth.values.assign(n, 0.0);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (out.truth.temporal) {
        const std::size_t b = std::stoul(cells[0]), t = std::stoul(cells[1]),
                          tp = std::stoul(cells[2]), f = std::stoul(cells[3]);
        out.truth.values[((b * out.truth.steps + t) * out.truth.steps + tp) *
                             out.truth.features + f] = std::stod(cells[4]);
      } else {
        const std::size_t b = std::stoul(cells[0]), t = std::stoul(cells[1]),
                          f = std::stoul(cells[2]);
        out.truth.values[(b * out.truth.steps + t) * out.truth.features + f] =
            std::stod(cells[3]);
      }
    }
  }
  return out;
}

}  // namespace tsattr
