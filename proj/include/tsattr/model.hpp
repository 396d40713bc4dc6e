#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsattr/tensor.hpp"

namespace tsattr {

enum class Activation { ReLU, Softplus, Sigmoid, Tanh, Identity };

Activation activation_from_string(const std::string& name);
std::string activation_to_string(Activation a);

struct ActivationSpec {
  Activation kind = Activation::ReLU;
  double beta = 1.0;  // softplus sharpness, ignored otherwise
};

enum class Task { Binary, Multiclass, Regression };

Task task_from_string(const std::string& name);
std::string task_to_string(Task t);

// Differentiable predictor over a series x in R^{TxN}. Feedforward models
// return R^{C}; recurrent models return R^{TxC}, one prediction per time.
class Model {
 public:
  virtual ~Model() = default;

  virtual Tensor forward(const Tensor& x) const = 0;
  virtual std::size_t input_features() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual bool accepts_variable_length() const = 0;
  virtual Task task() const = 0;

  virtual std::vector<Tensor> parameters() const = 0;
  // Activation slots in topological order; swapping one preserves all shapes.
  virtual std::vector<ActivationSpec> activations() const = 0;
  virtual void set_activation(std::size_t index, ActivationSpec spec) = 0;

  // Copy that shares parameter tensors with the original.
  virtual std::shared_ptr<Model> clone_shared() const = 0;

  virtual std::string kind() const = 0;
  virtual std::string descriptor_json() const = 0;

  // Plain (non-graph) evaluation helpers.
  std::vector<double> predict(const Tensor& x) const;       // flat output values
  std::vector<double> predict_step(const Tensor& x, std::size_t t) const;
  std::size_t predicted_class(const Tensor& x, std::size_t t) const;
};

using ModelPtr = std::shared_ptr<Model>;

// Fully connected net on the flattened series; fixed input length.
class Mlp : public Model {
 public:
  // units = [in, hidden..., out]; one activation slot after each hidden layer.
  Mlp(std::vector<std::size_t> units, Task task,
      ActivationSpec hidden = {Activation::ReLU, 1.0}, std::uint64_t seed = 0);
  Mlp(std::vector<std::size_t> units, Task task, std::vector<Tensor> weights,
      std::vector<Tensor> biases, std::vector<ActivationSpec> acts);

  Tensor forward(const Tensor& x) const override;
  std::size_t input_features() const override { return units_.front(); }
  std::size_t output_dim() const override { return units_.back(); }
  bool accepts_variable_length() const override { return false; }
  Task task() const override { return task_; }
  std::vector<Tensor> parameters() const override;
  std::vector<ActivationSpec> activations() const override { return acts_; }
  void set_activation(std::size_t index, ActivationSpec spec) override;
  std::shared_ptr<Model> clone_shared() const override;
  std::string kind() const override { return "mlp"; }
  std::string descriptor_json() const override;

  const std::vector<std::size_t>& units() const { return units_; }

 private:
  std::vector<std::size_t> units_;
  Task task_;
  std::vector<Tensor> weights_, biases_;
  std::vector<ActivationSpec> acts_;
};

// Single-layer Elman network: h_t = act(x_t Wxh + h_{t-1} Whh + bh),
// y_t = h_t Why + by. Causal by construction.
class Rnn : public Model {
 public:
  Rnn(std::size_t input, std::size_t hidden, std::size_t output, Task task,
      std::uint64_t seed = 0);
  Rnn(std::size_t input, std::size_t hidden, std::size_t output, Task task,
      std::vector<Tensor> params, ActivationSpec hidden_act);

  Tensor forward(const Tensor& x) const override;
  std::size_t input_features() const override { return input_; }
  std::size_t output_dim() const override { return output_; }
  bool accepts_variable_length() const override { return true; }
  Task task() const override { return task_; }
  std::vector<Tensor> parameters() const override;
  std::vector<ActivationSpec> activations() const override { return {hidden_act_}; }
  void set_activation(std::size_t index, ActivationSpec spec) override;
  std::shared_ptr<Model> clone_shared() const override;
  std::string kind() const override { return "rnn"; }
  std::string descriptor_json() const override;

  std::size_t hidden_size() const { return hidden_; }

 private:
  std::size_t input_, hidden_, output_;
  Task task_;
  Tensor wxh_, whh_, bh_, why_, by_;
  ActivationSpec hidden_act_{Activation::Tanh, 1.0};
};

// f(x) = sum of x_{ti}^2 over a rectangular salient window; parameter-free
// regressor with analytically known saliency. Accepts any series length.
class WindowSquareRegressor : public Model {
 public:
  WindowSquareRegressor(std::size_t features, std::size_t t_begin, std::size_t t_end,
                        std::vector<std::size_t> salient_features);

  Tensor forward(const Tensor& x) const override;
  std::size_t input_features() const override { return features_; }
  std::size_t output_dim() const override { return 1; }
  bool accepts_variable_length() const override { return true; }
  Task task() const override { return Task::Regression; }
  std::vector<Tensor> parameters() const override { return {}; }
  std::vector<ActivationSpec> activations() const override { return {}; }
  void set_activation(std::size_t, ActivationSpec) override;
  std::shared_ptr<Model> clone_shared() const override;
  std::string kind() const override { return "window_square"; }
  std::string descriptor_json() const override;

  std::size_t t_begin() const { return t_begin_; }
  std::size_t t_end() const { return t_end_; }
  const std::vector<std::size_t>& salient_features() const { return salient_; }

 private:
  std::size_t features_, t_begin_, t_end_;
  std::vector<std::size_t> salient_;
};

struct TrainConfig {
  std::size_t epochs = 50;
  double learning_rate = 0.05;
  std::size_t batch_size = 8;
  std::string loss = "cross_entropy";  // or "mse"
  std::uint64_t seed = 0;
};

struct SeriesBatch;  // datasets.hpp

struct TrainResult {
  std::vector<double> loss_curve;  // mean loss per epoch
};

TrainResult train(Model& model, const SeriesBatch& data, const TrainConfig& cfg);

// Returns a clone with every from-activation replaced; original untouched.
// Parameters are shared, never copied.
ModelPtr swap_activations(const Model& model, Activation from, Activation to,
                          double beta = 1.0);

void save_model(const Model& model, const std::string& path);
ModelPtr load_model(const std::string& path);

}  // namespace tsattr
