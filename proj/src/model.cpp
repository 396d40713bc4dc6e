#include "tsattr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "tsattr/datasets.hpp"

namespace tsattr {

using nlohmann::json;

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "softplus") return Activation::Softplus;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw std::runtime_error("unknown activation kind: " + name);
}

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  throw std::runtime_error("invalid activation enum");
}

Task task_from_string(const std::string& name) {
  if (name == "binary") return Task::Binary;
  if (name == "multiclass") return Task::Multiclass;
  if (name == "regression") return Task::Regression;
  throw std::runtime_error("unknown task kind: " + name);
}

std::string task_to_string(Task t) {
  switch (t) {
    case Task::Binary: return "binary";
    case Task::Multiclass: return "multiclass";
    case Task::Regression: return "regression";
  }
  throw std::runtime_error("invalid task enum");
}

namespace {

Tensor apply_activation(const Tensor& t, const ActivationSpec& spec) {
  switch (spec.kind) {
    case Activation::ReLU: return relu(t);
    case Activation::Softplus: return softplus(t, spec.beta);
    case Activation::Sigmoid: return sigmoid(t);
    case Activation::Tanh: return tanh_op(t);
    case Activation::Identity: return t;
  }
  throw std::runtime_error("invalid activation enum");
}

Tensor init_param(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1))));
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = dist(rng);
  return Tensor(std::move(shape), std::move(d), true);
}

json activation_json(const ActivationSpec& a) {
  return json{{"kind", activation_to_string(a.kind)}, {"beta", a.beta}};
}

ActivationSpec activation_from_json(const json& j) {
  return {activation_from_string(j.at("kind").get<std::string>()),
          j.value("beta", 1.0)};
}

}  // namespace

std::vector<double> Model::predict(const Tensor& x) const {
  return forward(x).values();
}

std::vector<double> Model::predict_step(const Tensor& x, std::size_t t) const {
  Tensor out = forward(x);
  if (out.shape().size() == 2 && out.rows() > 1) {
    const std::size_t C = out.cols();
    std::vector<double> row(C);
    for (std::size_t c = 0; c < C; ++c) row[c] = out.at(t * C + c);
    return row;
  }
  return out.values();
}

std::size_t Model::predicted_class(const Tensor& x, std::size_t t) const {
  const std::vector<double> out = predict_step(x, t);
  return static_cast<std::size_t>(
      std::max_element(out.begin(), out.end()) - out.begin());
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<std::size_t> units, Task task, ActivationSpec hidden,
         std::uint64_t seed)
    : units_(std::move(units)), task_(task) {
  if (units_.size() < 2) throw std::runtime_error("mlp needs at least [in, out] units");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < units_.size(); ++l) {
    weights_.push_back(init_param({units_[l], units_[l + 1]}, units_[l], rng));
    biases_.push_back(init_param({units_[l + 1]}, units_[l], rng));
    if (l + 2 < units_.size()) acts_.push_back(hidden);
  }
}

Mlp::Mlp(std::vector<std::size_t> units, Task task, std::vector<Tensor> weights,
         std::vector<Tensor> biases, std::vector<ActivationSpec> acts)
    : units_(std::move(units)), task_(task), weights_(std::move(weights)),
      biases_(std::move(biases)), acts_(std::move(acts)) {}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.size() != units_.front())
    throw std::runtime_error("mlp expects a fixed input of " +
                             std::to_string(units_.front()) + " values, got " +
                             shape_str(x.shape()));
  Tensor h = reshape(x, {1, units_.front()});
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_rowvec(matmul(h, weights_[l]), biases_[l]);
    if (l < acts_.size()) h = apply_activation(h, acts_[l]);
  }
  return reshape(h, {units_.back()});
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> ps = weights_;
  ps.insert(ps.end(), biases_.begin(), biases_.end());
  return ps;
}

void Mlp::set_activation(std::size_t index, ActivationSpec spec) {
  acts_.at(index) = spec;
}

std::shared_ptr<Model> Mlp::clone_shared() const {
  return std::make_shared<Mlp>(units_, task_, weights_, biases_, acts_);
}

std::string Mlp::descriptor_json() const {
  json j{{"kind", "mlp"}, {"task", task_to_string(task_)}, {"units", units_}};
  json acts = json::array();
  for (const auto& a : acts_) acts.push_back(activation_json(a));
  j["activations"] = acts;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Rnn

Rnn::Rnn(std::size_t input, std::size_t hidden, std::size_t output, Task task,
         std::uint64_t seed)
    : input_(input), hidden_(hidden), output_(output), task_(task) {
  std::mt19937_64 rng(seed);
  wxh_ = init_param({input_, hidden_}, input_, rng);
  whh_ = init_param({hidden_, hidden_}, hidden_, rng);
  bh_ = init_param({hidden_}, hidden_, rng);
  why_ = init_param({hidden_, output_}, hidden_, rng);
  by_ = init_param({output_}, hidden_, rng);
}

Rnn::Rnn(std::size_t input, std::size_t hidden, std::size_t output, Task task,
         std::vector<Tensor> params, ActivationSpec hidden_act)
    : input_(input), hidden_(hidden), output_(output), task_(task),
      hidden_act_(hidden_act) {
  if (params.size() != 5) throw std::runtime_error("rnn expects 5 parameter tensors");
  wxh_ = params[0];
  whh_ = params[1];
  bh_ = params[2];
  why_ = params[3];
  by_ = params[4];
}

Tensor Rnn::forward(const Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != input_)
    throw std::runtime_error("rnn expects a T x " + std::to_string(input_) +
                             " series, got " + shape_str(x.shape()));
  const std::size_t T = x.rows();
  Tensor h = Tensor::zeros({1, hidden_});
  std::vector<Tensor> outputs;
  outputs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Tensor xt = slice_rows(x, t, t + 1);
    Tensor pre = add_rowvec(add(matmul(xt, wxh_), matmul(h, whh_)), bh_);
    h = apply_activation(pre, hidden_act_);
    outputs.push_back(add_rowvec(matmul(h, why_), by_));
  }
  return concat_rows(outputs);
}

std::vector<Tensor> Rnn::parameters() const { return {wxh_, whh_, bh_, why_, by_}; }

void Rnn::set_activation(std::size_t index, ActivationSpec spec) {
  if (index != 0) throw std::runtime_error("rnn has a single activation slot");
  hidden_act_ = spec;
}

std::shared_ptr<Model> Rnn::clone_shared() const {
  return std::make_shared<Rnn>(input_, hidden_, output_, task_, parameters(),
                               hidden_act_);
}

std::string Rnn::descriptor_json() const {
  json j{{"kind", "rnn"}, {"task", task_to_string(task_)},
         {"input", input_}, {"hidden", hidden_}, {"output", output_},
         {"hidden_activation", activation_json(hidden_act_)}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// WindowSquareRegressor

WindowSquareRegressor::WindowSquareRegressor(std::size_t features, std::size_t t_begin,
                                             std::size_t t_end,
                                             std::vector<std::size_t> salient_features)
    : features_(features), t_begin_(t_begin), t_end_(t_end),
      salient_(std::move(salient_features)) {
  if (t_begin_ >= t_end_) throw std::runtime_error("salient window is empty");
  if (salient_.empty()) throw std::runtime_error("salient feature set is empty");
  for (std::size_t f : salient_)
    if (f >= features_) throw std::runtime_error("salient feature index out of range");
}

Tensor WindowSquareRegressor::forward(const Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != features_)
    throw std::runtime_error("window_square expects T x " + std::to_string(features_) +
                             " input, got " + shape_str(x.shape()));
  const std::size_t T = x.rows();
  std::vector<double> mask(T * features_, 0.0);
  for (std::size_t t = t_begin_; t < std::min(t_end_, T); ++t)
    for (std::size_t f : salient_) mask[t * features_ + f] = 1.0;
  Tensor m(Shape{T, features_}, std::move(mask));
  return sum(mul(mul(x, x), m));
}

void WindowSquareRegressor::set_activation(std::size_t, ActivationSpec) {
  throw std::runtime_error("window_square has no activation slots");
}

std::shared_ptr<Model> WindowSquareRegressor::clone_shared() const {
  return std::make_shared<WindowSquareRegressor>(features_, t_begin_, t_end_, salient_);
}

std::string WindowSquareRegressor::descriptor_json() const {
  json j{{"kind", "window_square"}, {"features", features_},
         {"t_begin", t_begin_}, {"t_end", t_end_}, {"salient", salient_}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(Model& model, const SeriesBatch& data, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::runtime_error("train: epochs must be >= 1");
  if (cfg.learning_rate <= 0.0) throw std::runtime_error("train: learning rate must be positive");
  if (data.label_kind == LabelKind::None)
    throw std::runtime_error("train: dataset has no labels");
  if (cfg.loss != "cross_entropy" && cfg.loss != "mse")
    throw std::runtime_error("train: unknown loss kind: " + cfg.loss);
  const bool temporal = data.label_kind == LabelKind::Temporal;
  if (temporal && !model.accepts_variable_length())
    throw std::runtime_error("train: temporal labels require a recurrent model");

  std::vector<Tensor> params = model.parameters();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.batch);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    try {
      while (pos < data.batch) {
        const std::size_t take = std::min(cfg.batch_size, data.batch - pos);
        Tensor total;
        for (std::size_t j = 0; j < take; ++j) {
          const std::size_t b = order[pos + j];
          Tensor out = model.forward(data.series(b));
          Tensor loss;
          if (cfg.loss == "cross_entropy") {
            if (temporal) {
              std::vector<std::size_t> labels(data.steps);
              for (std::size_t t = 0; t < data.steps; ++t)
                labels[t] = static_cast<std::size_t>(data.label_at(b, t));
              loss = cross_entropy(out, labels);
            } else {
              std::vector<std::size_t> labels{static_cast<std::size_t>(data.label_at(b))};
              loss = cross_entropy(reshape(out, {1, out.size()}), labels);
            }
          } else {
            Tensor target = temporal
                ? Tensor(Shape{data.steps, 1},
                         std::vector<double>(data.labels.begin() + static_cast<std::ptrdiff_t>(b * data.steps),
                                             data.labels.begin() + static_cast<std::ptrdiff_t>((b + 1) * data.steps)))
                : Tensor(out.shape(), std::vector<double>(out.size(), data.label_at(b)));
            loss = mse_loss(out, target);
          }
          total = total.defined() ? add(total, loss) : loss;
        }
        total = scale(total, 1.0 / static_cast<double>(take));
        if (!std::isfinite(total.value()))
          throw std::runtime_error("non-finite loss");
        epoch_loss += total.value() * static_cast<double>(take);
        backward(total);
        for (Tensor& p : params) {
          auto& d = p.mutable_data();
          const auto& g = p.grad();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] -= cfg.learning_rate * g[i];
        }
        pos += take;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("train: aborted at epoch " + std::to_string(epoch) +
                               ": " + e.what());
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(data.batch));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Activation swapping

ModelPtr swap_activations(const Model& model, Activation from, Activation to,
                          double beta) {
  ModelPtr copy = model.clone_shared();
  const std::vector<ActivationSpec> acts = copy->activations();
  std::size_t replaced = 0;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    if (acts[i].kind == from) {
      copy->set_activation(i, {to, beta});
      ++replaced;
    }
  }
  if (replaced == 0)
    std::cerr << "warning: swap_activations found no " << activation_to_string(from)
              << " modules; model unchanged\n";
  return copy;
}

// ---------------------------------------------------------------------------
// Serialization: magic "TATK", version u32, u32-length JSON descriptor,
// little-endian f64 parameter arrays in descriptor order.

namespace {

constexpr std::uint32_t kModelVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64_array(std::ostream& os, const std::vector<double>& v) {
  static_assert(sizeof(double) == 8);
  // assumes little-endian host, which this toolchain targets
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * 8));
}

std::vector<double> read_f64_array(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  return v;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open model file for writing: " + path);
  os.write("TATK", 4);
  write_u32(os, kModelVersion);
  const std::string desc = model.descriptor_json();
  write_u32(os, static_cast<std::uint32_t>(desc.size()));
  os.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  for (const Tensor& p : model.parameters()) write_f64_array(os, p.values());
  if (!os) throw std::runtime_error("failed writing model file: " + path);
}

ModelPtr load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "TATK", 4) != 0)
    throw std::runtime_error("bad model file magic: " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kModelVersion)
    throw std::runtime_error("unsupported model version " + std::to_string(version));
  const std::uint32_t len = read_u32(is);
  std::string desc(len, '\0');
  is.read(desc.data(), len);
  const json j = json::parse(desc);
  const std::string kind = j.at("kind").get<std::string>();

  if (kind == "mlp") {
    const auto units = j.at("units").get<std::vector<std::size_t>>();
    const Task task = task_from_string(j.at("task").get<std::string>());
    std::vector<ActivationSpec> acts;
    for (const auto& a : j.at("activations")) acts.push_back(activation_from_json(a));
    std::vector<Tensor> weights, biases;
    for (std::size_t l = 0; l + 1 < units.size(); ++l)
      weights.emplace_back(Shape{units[l], units[l + 1]},
                           read_f64_array(is, units[l] * units[l + 1]), true);
    for (std::size_t l = 0; l + 1 < units.size(); ++l)
      biases.emplace_back(Shape{units[l + 1]}, read_f64_array(is, units[l + 1]), true);
    if (!is) throw std::runtime_error("truncated model file: " + path);
    return std::make_shared<Mlp>(units, task, std::move(weights), std::move(biases),
                                 std::move(acts));
  }
  if (kind == "rnn") {
    const auto input = j.at("input").get<std::size_t>();
    const auto hidden = j.at("hidden").get<std::size_t>();
    const auto output = j.at("output").get<std::size_t>();
    const Task task = task_from_string(j.at("task").get<std::string>());
    const ActivationSpec act = activation_from_json(j.at("hidden_activation"));
    std::vector<Tensor> params;
    params.emplace_back(Shape{input, hidden}, read_f64_array(is, input * hidden), true);
    params.emplace_back(Shape{hidden, hidden}, read_f64_array(is, hidden * hidden), true);
    params.emplace_back(Shape{hidden}, read_f64_array(is, hidden), true);
    params.emplace_back(Shape{hidden, output}, read_f64_array(is, hidden * output), true);
    params.emplace_back(Shape{output}, read_f64_array(is, output), true);
    if (!is) throw std::runtime_error("truncated model file: " + path);
    return std::make_shared<Rnn>(input, hidden, output, task, std::move(params), act);
  }
  if (kind == "window_square") {
    return std::make_shared<WindowSquareRegressor>(
        j.at("features").get<std::size_t>(), j.at("t_begin").get<std::size_t>(),
        j.at("t_end").get<std::size_t>(),
        j.at("salient").get<std::vector<std::size_t>>());
  }
  throw std::runtime_error("unknown model kind in file: " + kind);
}

}  // namespace tsattr
