#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsattr/model.hpp"
#include "tsattr/tensor.hpp"

namespace tsattr {

enum class LabelKind { None, Static, Temporal };

// Batch of series, row-major B x T x N, with optional labels and an optional
// background set for bootstrap/LOF methods.
struct SeriesBatch {
  std::size_t batch = 0, steps = 0, features = 0;
  std::vector<double> inputs;          // B*T*N
  std::vector<double> labels;          // B (static) or B*T (temporal)
  LabelKind label_kind = LabelKind::None;
  std::vector<double> background;      // M*T*N, optional
  std::size_t background_count = 0;

  Tensor series(std::size_t b) const;  // T x N tensor for one series
  double label_at(std::size_t b, std::size_t t = 0) const;
};

struct SaliencyTruth {
  enum class Kind { Binary, Real };
  bool temporal = false;               // B*T*T*N when true, else B*T*N
  std::size_t batch = 0, steps = 0, features = 0;
  std::vector<double> values;
  Kind kind = Kind::Binary;

  std::size_t instance_size() const;
  // values for one instance, flattened T*N or T*T*N
  std::vector<double> instance(std::size_t b) const;
};

struct ArmaSpec {
  std::size_t batch = 32, steps = 50, features = 3;
  std::vector<double> ar = {0.25, 0.1};   // phi, stationarity checked
  std::vector<double> ma = {0.5, 0.2};    // theta
  // salient window: times [t_begin, t_end), feature subset
  std::size_t t_begin = 20, t_end = 30;
  std::vector<std::size_t> salient_features = {1};
  std::uint64_t seed = 0;
};

struct ArmaDataset {
  SeriesBatch data;
  SaliencyTruth truth;
  ModelPtr regressor;  // white-box f(x) = sum of squares over the window
};

ArmaDataset generate_arma(const ArmaSpec& spec);

struct HmmSpec {
  std::size_t batch = 100, steps = 50;
  // 2-state chain; state s makes feature 1+s salient, feature 0 is noise
  double stay_prob = 0.9;
  double emission_sigma = 0.1;
  std::uint64_t seed = 0;
};

struct HmmDataset {
  SeriesBatch data;     // N = 3, temporal binary labels
  SaliencyTruth truth;  // one-hot per time over the salient feature
  std::vector<int> states;  // B*T hidden states, exposed for diagnostics
};

HmmDataset generate_hmm(const HmmSpec& spec);

struct HawkesParams {
  std::size_t types = 1;            // K
  std::vector<double> mu;           // K
  std::vector<double> alpha;        // K*K row-major, alpha[k*K+n]
  std::vector<double> beta;         // K*K
  double horizon = 100.0;

  void validate() const;  // mu>0, alpha>=0, beta>0, spectral radius of a/b < 1
};

struct Event {
  double time;
  std::size_t type;
};

// Conditional intensity of type k at time t given events strictly before t.
// History must be sorted ascending in time.
double hawkes_intensity(const HawkesParams& params, const std::vector<Event>& history,
                        double t, std::size_t k);

struct HawkesDataset {
  std::vector<std::vector<Event>> sequences;  // B event lists
  SeriesBatch data;                            // per-bin event counts, T x K
  SaliencyTruth truth;                         // temporal, B*T*T*K
};

// Ogata thinning simulation, discretized into `bins` equal intervals.
HawkesDataset generate_hawkes(const HawkesParams& params, std::size_t batch,
                              std::size_t bins, std::uint64_t seed);

// Directory serialization: inputs.csv, labels.csv, truth.csv, meta.json.
void save_dataset(const SeriesBatch& data, const SaliencyTruth& truth,
                  const std::string& meta_json, const std::string& dir);
struct LoadedDataset {
  SeriesBatch data;
  SaliencyTruth truth;
  std::string meta_json;
};
LoadedDataset load_dataset(const std::string& dir);

// 17 significant digits, round-trip exact for f64.
std::string format_double(double v);

}  // namespace tsattr
