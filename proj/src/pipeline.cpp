#include "tsattr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tsattr/attribution.hpp"
#include "tsattr/datasets.hpp"
#include "tsattr/metrics.hpp"
#include "tsattr/model.hpp"

namespace tsattr {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& available_methods() {
  static const std::vector<std::string> names = {
      "dynamask",       "integrated_gradients", "kernel_shap",
      "lime",           "occlusion",            "random",
      "temporal_integrated_gradients",          "time_forward_tunnel"};
  return names;
}

const std::vector<std::string>& available_datasets() {
  static const std::vector<std::string> names = {"arma", "hawkes", "hmm"};
  return names;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open file: " + path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open file for writing: " + path.string());
  os << text;
}

std::string out_dir(const json& cfg) { return cfg.at("output").get<std::string>(); }

void validate_method_entry(const json& entry) {
  if (!entry.contains("name"))
    throw std::runtime_error("config: method entry without a name");
  const std::string name = entry.at("name").get<std::string>();
  const auto& names = available_methods();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw std::runtime_error("config: unknown method '" + name +
                             "'; available methods: " + join(names));
}

// ---------------------------------------------------------------------------
// Config-driven construction

BaselineSpec baseline_from_json(const json& j, const BackgroundView& background) {
  BaselineSpec spec;
  const std::string kind = j.value("kind", std::string("zeros"));
  if (kind == "zeros") {
    spec.kind = BaselineSpec::Kind::Zeros;
  } else if (kind == "constant") {
    spec.kind = BaselineSpec::Kind::Constant;
    spec.constant = j.at("constant").get<double>();
  } else if (kind == "sample") {
    spec.kind = BaselineSpec::Kind::Sample;
    spec.background = background;
  } else {
    throw std::runtime_error("config: unknown baseline kind '" + kind + "'");
  }
  return spec;
}

// One configured attribution method bound to a dataset's background set.
struct MethodRunner {
  std::string label;
  json echo;  // options with defaults resolved
  std::function<Attribution(const Model&, const Tensor&, std::size_t)> run;
};

MethodRunner make_runner(const json& entry, const BackgroundView& background);

InnerMethod make_inner(const json& entry, const BackgroundView& background) {
  MethodRunner runner = make_runner(entry, background);
  const std::string name = entry.at("name").get<std::string>();
  if (name == "integrated_gradients") {
    const std::size_t steps = entry.value("steps", std::size_t{64});
    const BaselineSpec base = baseline_from_json(entry.value("baseline", json::object()),
                                                 background);
    return [steps, base](const Model& m, const Tensor& x,
                         std::optional<std::size_t> target) {
      return integrated_gradients(m, x, base, steps, target);
    };
  }
  if (name == "occlusion") {
    const json opts = entry;
    return [opts, background](const Model& m, const Tensor& x,
                              std::optional<std::size_t> target) {
      const BaselineSpec base = baseline_from_json(opts.value("baseline", json::object()),
                                                   background);
      return occlusion(m, x, occlusion_strategy_from_string(
                                 opts.value("strategy", std::string("fixed"))),
                       base, background, opts.value("draws", std::size_t{25}), target,
                       opts.value("seed", std::uint64_t{0}));
    };
  }
  throw std::runtime_error("config: method '" + name +
                           "' cannot be used inside time_forward_tunnel");
}

MethodRunner make_runner(const json& entry, const BackgroundView& background) {
  validate_method_entry(entry);
  const std::string name = entry.at("name").get<std::string>();
  MethodRunner runner;
  runner.label = entry.value("label", name);
  runner.echo = entry;

  const BaselineSpec base =
      baseline_from_json(entry.value("baseline", json::object()), background);
  const std::uint64_t seed = entry.value("seed", std::uint64_t{0});

  if (name == "integrated_gradients") {
    const std::size_t steps = entry.value("steps", std::size_t{64});
    runner.echo["steps"] = steps;
    runner.run = [=](const Model& m, const Tensor& x, std::size_t) {
      return integrated_gradients(m, x, base, steps);
    };
  } else if (name == "temporal_integrated_gradients") {
    const std::size_t steps = entry.value("steps", std::size_t{64});
    const bool normalize = entry.value("normalize", true);
    runner.echo["steps"] = steps;
    runner.run = [=](const Model& m, const Tensor& x, std::size_t) {
      return temporal_integrated_gradients(m, x, base, steps, normalize);
    };
  } else if (name == "time_forward_tunnel") {
    const json inner_cfg = entry.value("inner", json{{"name", "integrated_gradients"}});
    validate_method_entry(inner_cfg);
    const InnerMethod inner = make_inner(inner_cfg, background);
    const bool temporal = entry.value("temporal", false);
    runner.run = [=](const Model& m, const Tensor& x, std::size_t) {
      return time_forward_tunnel(inner, m, x, temporal);
    };
  } else if (name == "occlusion") {
    const OcclusionStrategy strategy =
        occlusion_strategy_from_string(entry.value("strategy", std::string("fixed")));
    const std::size_t draws = entry.value("draws", std::size_t{25});
    runner.run = [=](const Model& m, const Tensor& x, std::size_t b) {
      return occlusion(m, x, strategy, base, background, draws, {}, seed + b);
    };
  } else if (name == "lime") {
    LimeOptions opts;
    opts.n_samples = entry.value("n_samples", std::size_t{1000});
    opts.lof_kernel = entry.value("lof_kernel", false);
    opts.euclidean = entry.value("distance", std::string("cosine")) == "euclidean";
    opts.lof_k = entry.value("lof_k", std::size_t{5});
    opts.baseline = base;
    opts.background = background;
    runner.run = [=](const Model& m, const Tensor& x, std::size_t b) {
      LimeOptions o = opts;
      o.seed = seed + b;
      return lime(m, x, o);
    };
  } else if (name == "kernel_shap") {
    KernelShapOptions opts;
    opts.n_samples = entry.value("n_samples", std::size_t{0});
    opts.lof_kernel = entry.value("lof_kernel", false);
    opts.lof_k = entry.value("lof_k", std::size_t{5});
    opts.baseline = base;
    opts.background = background;
    runner.run = [=](const Model& m, const Tensor& x, std::size_t b) {
      KernelShapOptions o = opts;
      o.seed = seed + b;
      return kernel_shap(m, x, o);
    };
  } else if (name == "dynamask") {
    DynamaskOptions opts;
    opts.keep_ratio = entry.value("keep_ratio", 0.5);
    opts.epochs = entry.value("epochs", std::size_t{200});
    opts.learning_rate = entry.value("learning_rate", 0.1);
    opts.window = entry.value("window", std::size_t{5});
    opts.mode = entry.value("mode", std::string("preserve")) == "delete"
                    ? MaskMode::Delete
                    : MaskMode::Preserve;
    opts.outer_steps = entry.value("outer_steps", std::size_t{10});
    runner.run = [=](const Model& m, const Tensor& x, std::size_t) {
      return dynamask(m, x, opts);
    };
  } else if (name == "random") {
    runner.run = [=](const Model&, const Tensor& x, std::size_t b) {
      Attribution a;
      a.steps = x.rows();
      a.features = x.cols();
      a.method = "random";
      a.values.resize(x.size());
      std::mt19937_64 rng(seed + 1000003ULL * (b + 1));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (double& v : a.values) v = unif(rng);
      return a;
    };
  }
  return runner;
}

// ---------------------------------------------------------------------------
// Batch attribution CSV (per-instance format plus a leading series column)

void save_attribution_batch(const std::vector<Attribution>& attrs,
                            const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open attribution file for writing: " + path);
  const bool temporal = !attrs.empty() && attrs.front().temporal;
  os << (temporal ? "b,t,tp,f,value\n" : "b,t,f,value\n");
  for (std::size_t b = 0; b < attrs.size(); ++b) {
    const Attribution& a = attrs[b];
    if (temporal) {
      for (std::size_t t = 0; t < a.steps; ++t)
        for (std::size_t tp = 0; tp < a.steps; ++tp)
          for (std::size_t f = 0; f < a.features; ++f)
            os << b << ',' << t << ',' << tp << ',' << f << ','
               << format_double(a.at(t, tp, f)) << '\n';
    } else {
      for (std::size_t t = 0; t < a.steps; ++t)
        for (std::size_t f = 0; f < a.features; ++f)
          os << b << ',' << t << ',' << f << ',' << format_double(a.at(t, f)) << '\n';
    }
  }
}

std::vector<Attribution> load_attribution_batch(const std::string& path,
                                                const std::string& method) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing attribution file: " + path);
  std::string header;
  std::getline(is, header);
  const bool temporal = header == "b,t,tp,f,value";
  if (!temporal && header != "b,t,f,value")
    throw std::runtime_error("unrecognized attribution header in " + path);

  std::vector<Attribution> attrs;
  std::string line;
  std::size_t max_t = 0, max_f = 0;
  std::vector<std::vector<double>> raw;  // per series, in row order
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != (temporal ? 5u : 4u))
      throw std::runtime_error("malformed attribution row in " + path + ": " + line);
    const std::size_t b = std::stoull(cols[0]);
    if (b >= raw.size()) raw.resize(b + 1);
    raw[b].push_back(std::stod(cols.back()));
    max_t = std::max(max_t, static_cast<std::size_t>(std::stoull(cols[1])));
    max_f = std::max(max_f,
                     static_cast<std::size_t>(std::stoull(cols[temporal ? 3 : 2])));
  }
  const std::size_t T = max_t + 1, N = max_f + 1;
  for (auto& values : raw) {
    const std::size_t expect = temporal ? T * T * N : T * N;
    if (values.size() != expect)
      throw std::runtime_error("attribution file " + path +
                               " has inconsistent per-series sizes");
    Attribution a;
    a.temporal = temporal;
    a.steps = T;
    a.features = N;
    a.method = method;
    a.values = std::move(values);
    attrs.push_back(std::move(a));
  }
  return attrs;
}

// ---------------------------------------------------------------------------
// Stage inputs

LoadedDataset require_dataset(const json& cfg) {
  const fs::path dir = fs::path(out_dir(cfg)) / "dataset";
  if (!fs::exists(dir / "meta.json"))
    throw std::runtime_error("missing dataset artifact: " + (dir / "meta.json").string() +
                             " (run the generate stage first)");
  return load_dataset(dir.string());
}

ModelPtr require_model(const json& cfg) {
  const fs::path path = fs::path(out_dir(cfg)) / "model.bin";
  if (!fs::exists(path))
    throw std::runtime_error("missing model artifact: " + path.string() +
                             " (run the train stage first)");
  return load_model(path.string());
}

BackgroundView dataset_background(const SeriesBatch& data) {
  return BackgroundView{&data.inputs, data.batch, data.steps, data.features};
}

MaskPolicy policy_from_json(const json& j, const BackgroundView& background) {
  MaskPolicy p;
  p.fraction = j.value("fraction", 0.2);
  p.side = j.value("side", std::string("top")) == "bottom" ? MaskSide::Bottom
                                                           : MaskSide::Top;
  p.mode = j.value("mode", std::string("remove")) == "keep" ? MaskAction::Keep
                                                            : MaskAction::Remove;
  p.baseline = baseline_from_json(j.value("baseline", json::object()), background);
  p.noise_sigma = j.value("noise_sigma", 0.0);
  p.draws = j.value("draws", std::size_t{1});
  const std::string w = j.value("weight", std::string("none"));
  if (w == "none")
    p.weight_fn.kind = WeightFn::Kind::None;
  else if (w == "lime_cosine")
    p.weight_fn.kind = WeightFn::Kind::LimeCosine;
  else if (w == "lime_euclidean")
    p.weight_fn.kind = WeightFn::Kind::LimeEuclidean;
  else if (w == "lof")
    p.weight_fn.kind = WeightFn::Kind::Lof;
  else
    throw std::runtime_error("config: unknown policy weight '" + w + "'");
  p.weight_fn.lof_k = j.value("lof_k", std::size_t{5});
  p.background = background;
  p.seed = j.value("seed", std::uint64_t{0});
  return p;
}

std::string policy_label(const json& j) {
  if (j.contains("label")) return j.at("label").get<std::string>();
  std::ostringstream os;
  os << j.value("mode", std::string("remove")) << '_'
     << j.value("side", std::string("top")) << '_' << j.value("fraction", 0.2);
  if (j.value("noise_sigma", 0.0) > 0.0) os << "_noise" << j.at("noise_sigma").get<double>();
  if (j.value("draws", std::size_t{1}) > 1) os << "_draws" << j.at("draws").get<std::size_t>();
  if (j.value("weight", std::string("none")) != "none")
    os << "_w" << j.at("weight").get<std::string>();
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config loading

std::string load_experiment_config(const std::string& config_path,
                                   const PipelineOverrides& overrides) {
  json cfg = read_json_file(config_path);
  if (overrides.out_dir) cfg["output"] = *overrides.out_dir;
  if (!cfg.contains("output"))
    throw std::runtime_error("config: no output directory (set \"output\" or pass --out)");

  if (!cfg.contains("dataset") || !cfg["dataset"].contains("name"))
    throw std::runtime_error("config: missing dataset block with a name");
  const std::string ds = cfg["dataset"]["name"].get<std::string>();
  const auto& datasets = available_datasets();
  if (std::find(datasets.begin(), datasets.end(), ds) == datasets.end())
    throw std::runtime_error("config: unknown dataset '" + ds +
                             "'; available datasets: " + join(datasets));

  if (!cfg.contains("model") || !cfg["model"].contains("kind"))
    throw std::runtime_error("config: missing model block with a kind");
  const std::string kind = cfg["model"]["kind"].get<std::string>();
  if (kind != "window_square" && kind != "mlp" && kind != "rnn")
    throw std::runtime_error("config: unknown model kind '" + kind +
                             "'; available kinds: mlp, rnn, window_square");

  if (!cfg.contains("methods") || !cfg["methods"].is_array() || cfg["methods"].empty())
    throw std::runtime_error("config: methods must be a non-empty array");
  for (const json& entry : cfg["methods"]) {
    validate_method_entry(entry);
    if (entry.value("name", std::string()) == "time_forward_tunnel" &&
        entry.contains("inner"))
      validate_method_entry(entry["inner"]);
  }

  if (overrides.seed) {
    const std::uint64_t s = *overrides.seed;
    cfg["dataset"]["seed"] = s;
    cfg["model"]["seed"] = s;
    if (cfg["model"].contains("train")) cfg["model"]["train"]["seed"] = s;
    for (json& entry : cfg["methods"]) entry["seed"] = s;
    if (cfg.contains("metrics")) {
      if (cfg["metrics"].contains("black_box"))
        for (json& block : cfg["metrics"]["black_box"])
          block["policy"]["seed"] = s;
      if (cfg["metrics"].contains("lipschitz")) cfg["metrics"]["lipschitz"]["seed"] = s;
    }
  }
  return cfg.dump();
}

// ---------------------------------------------------------------------------
// Stages

void stage_generate(const std::string& config_json, bool force) {
  const json cfg = json::parse(config_json);
  const fs::path dir = fs::path(out_dir(cfg)) / "dataset";
  if (fs::exists(dir) && !force)
    throw std::runtime_error("dataset directory already exists: " + dir.string() +
                             " (pass --force to overwrite)");
  fs::create_directories(dir);

  const json& d = cfg.at("dataset");
  const std::string name = d.at("name").get<std::string>();
  if (name == "arma") {
    ArmaSpec spec;
    spec.batch = d.value("batch", spec.batch);
    spec.steps = d.value("steps", spec.steps);
    spec.features = d.value("features", spec.features);
    spec.ar = d.value("ar", spec.ar);
    spec.ma = d.value("ma", spec.ma);
    spec.t_begin = d.value("t_begin", spec.t_begin);
    spec.t_end = d.value("t_end", spec.t_end);
    spec.salient_features = d.value("salient_features", spec.salient_features);
    spec.seed = d.value("seed", spec.seed);
    ArmaDataset ds = generate_arma(spec);
    json meta = d;
    meta["t_begin"] = spec.t_begin;
    meta["t_end"] = spec.t_end;
    meta["salient_features"] = spec.salient_features;
    save_dataset(ds.data, ds.truth, meta.dump(), dir.string());
  } else if (name == "hmm") {
    HmmSpec spec;
    spec.batch = d.value("batch", spec.batch);
    spec.steps = d.value("steps", spec.steps);
    spec.stay_prob = d.value("stay_prob", spec.stay_prob);
    spec.emission_sigma = d.value("emission_sigma", spec.emission_sigma);
    spec.seed = d.value("seed", spec.seed);
    HmmDataset ds = generate_hmm(spec);
    save_dataset(ds.data, ds.truth, d.dump(), dir.string());
  } else {  // hawkes
    HawkesParams params;
    params.types = d.value("types", std::size_t{1});
    params.mu = d.value("mu", std::vector<double>{0.5});
    params.alpha = d.value("alpha", std::vector<double>{0.5});
    params.beta = d.value("beta", std::vector<double>{1.0});
    params.horizon = d.value("horizon", 100.0);
    HawkesDataset ds = generate_hawkes(params, d.value("batch", std::size_t{32}),
                                       d.value("bins", std::size_t{50}),
                                       d.value("seed", std::uint64_t{0}));
    save_dataset(ds.data, ds.truth, d.dump(), dir.string());
  }
}

void stage_train(const std::string& config_json) {
  const json cfg = json::parse(config_json);
  const LoadedDataset ds = require_dataset(cfg);
  const json& m = cfg.at("model");
  const std::string kind = m.at("kind").get<std::string>();

  ModelPtr model;
  bool needs_training = true;
  if (kind == "window_square") {
    const json meta = json::parse(ds.meta_json);
    if (!meta.contains("t_begin"))
      throw std::runtime_error("model kind window_square needs an arma dataset "
                               "(dataset meta has no salient window)");
    model = std::make_shared<WindowSquareRegressor>(
        ds.data.features, meta.at("t_begin").get<std::size_t>(),
        meta.at("t_end").get<std::size_t>(),
        meta.at("salient_features").get<std::vector<std::size_t>>());
    needs_training = false;
  } else {
    const Task task = task_from_string(m.value("task", std::string("binary")));
    const std::size_t classes =
        m.value("classes", task == Task::Regression ? std::size_t{1} : std::size_t{2});
    const std::uint64_t seed = m.value("seed", std::uint64_t{0});
    if (kind == "mlp") {
      std::vector<std::size_t> units{ds.data.steps * ds.data.features};
      for (std::size_t h : m.value("hidden", std::vector<std::size_t>{16}))
        units.push_back(h);
      units.push_back(classes);
      model = std::make_shared<Mlp>(units, task,
                                    ActivationSpec{activation_from_string(m.value(
                                                       "activation", std::string("relu"))),
                                                   m.value("beta", 1.0)},
                                    seed);
    } else {  // rnn
      model = std::make_shared<Rnn>(ds.data.features,
                                    m.value("hidden", std::size_t{16}), classes, task,
                                    seed);
    }
  }

  const fs::path out(out_dir(cfg));
  fs::create_directories(out);
  if (needs_training) {
    if (!m.contains("train"))
      throw std::runtime_error("config: model kind '" + kind + "' needs a train block");
    const json& t = m["train"];
    TrainConfig tc;
    tc.epochs = t.value("epochs", tc.epochs);
    tc.learning_rate = t.value("learning_rate", tc.learning_rate);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.loss = t.value("loss", model->task() == Task::Regression
                                  ? std::string("mse")
                                  : std::string("cross_entropy"));
    tc.seed = t.value("seed", tc.seed);
    const TrainResult result = train(*model, ds.data, tc);
    json curve{{"loss_curve", result.loss_curve}};
    write_text(out / "train.json", curve.dump(2) + "\n");
  }
  save_model(*model, (out / "model.bin").string());
}

void stage_attribute(const std::string& config_json, const PipelineOverrides& overrides) {
  const json cfg = json::parse(config_json);
  const LoadedDataset ds = require_dataset(cfg);
  const ModelPtr model = require_model(cfg);
  const BackgroundView background = dataset_background(ds.data);

  json methods = cfg.at("methods");
  if (overrides.method) {
    json entry{{"name", *overrides.method}};
    // reuse options from the config when the method is listed there
    for (const json& listed : cfg.at("methods"))
      if (listed.at("name").get<std::string>() == *overrides.method) entry = listed;
    if (overrides.steps) entry["steps"] = *overrides.steps;
    methods = json::array({entry});
  }

  const fs::path dir = fs::path(out_dir(cfg)) / "attributions";
  fs::create_directories(dir);
  for (const json& entry : methods) {
    MethodRunner runner = make_runner(entry, background);
    std::vector<Attribution> attrs;
    attrs.reserve(ds.data.batch);
    for (std::size_t b = 0; b < ds.data.batch; ++b)
      attrs.push_back(runner.run(*model, ds.data.series(b), b));
    save_attribution_batch(attrs, (dir / (runner.label + ".csv")).string());
    write_text(dir / (runner.label + ".meta.json"), runner.echo.dump(2) + "\n");
  }
}

void stage_evaluate(const std::string& config_json) {
  const json cfg = json::parse(config_json);
  const LoadedDataset ds = require_dataset(cfg);
  const ModelPtr model = require_model(cfg);
  const BackgroundView background = dataset_background(ds.data);
  const json metrics_cfg = cfg.value("metrics", json::object());
  const fs::path out(out_dir(cfg));
  const fs::path attr_dir = out / "attributions";

  struct Row {
    std::string method, metric, policy;
    double value;
  };
  std::vector<Row> rows;

  for (const json& entry : cfg.at("methods")) {
    const std::string label = entry.value("label", entry.at("name").get<std::string>());
    const std::string csv = (attr_dir / (label + ".csv")).string();
    const std::vector<Attribution> attrs = load_attribution_batch(csv, label);
    if (attrs.size() != ds.data.batch)
      throw std::runtime_error("attribution file " + csv + " holds " +
                               std::to_string(attrs.size()) + " series but dataset " +
                               (out / "dataset").string() + " holds " +
                               std::to_string(ds.data.batch));
    const Attribution& first = attrs.front();
    const std::size_t expect =
        first.temporal ? ds.data.steps * ds.data.steps * ds.data.features
                       : ds.data.steps * ds.data.features;
    if (first.values.size() != expect ||
        first.steps != ds.data.steps || first.features != ds.data.features)
      throw std::runtime_error(
          "shape mismatch: attribution file " + csv + " has T=" +
          std::to_string(first.steps) + " N=" + std::to_string(first.features) +
          " but dataset " + (out / "dataset").string() + " has T=" +
          std::to_string(ds.data.steps) + " N=" + std::to_string(ds.data.features));

    if (metrics_cfg.value("white_box", true)) {
      if (first.temporal != ds.truth.temporal)
        throw std::runtime_error("white-box metrics: attribution file " + csv +
                                 (first.temporal ? " is temporal" : " is static") +
                                 " but the dataset truth is not");
      std::map<std::string, double> sums;
      for (std::size_t b = 0; b < ds.data.batch; ++b) {
        const MetricReport r =
            white_box_metrics(attrs[b], ds.truth.instance(b),
                              ds.truth.kind == SaliencyTruth::Kind::Binary);
        for (const auto& [k, v] : r.values) sums[k] += v;
      }
      for (const auto& [k, v] : sums)
        rows.push_back({label, k, "", v / static_cast<double>(ds.data.batch)});
    }

    if (metrics_cfg.contains("black_box")) {
      for (const json& block : metrics_cfg.at("black_box")) {
        const MaskPolicy policy =
            policy_from_json(block.value("policy", json::object()), background);
        const std::string plabel = policy_label(block.value("policy", json::object()));
        for (const json& kind : block.at("kinds")) {
          const std::string k = kind.get<std::string>();
          rows.push_back({label, k, plabel,
                          black_box_metric_batch(k, *model, ds.data, attrs, policy)});
        }
      }
    }
  }

  if (metrics_cfg.contains("lipschitz")) {
    const json& l = metrics_cfg.at("lipschitz");
    for (const json& entry : cfg.at("methods")) {
      MethodRunner runner = make_runner(entry, background);
      AttributionFn fn = [&runner](const Model& m, const Tensor& x) {
        return runner.run(m, x, 0);
      };
      rows.push_back({runner.label, "lipschitz_max", "",
                      lipschitz_max(fn, *model, ds.data.series(0),
                                    l.value("radius", 0.1),
                                    l.value("n_samples", std::size_t{10}),
                                    l.value("seed", std::uint64_t{0}))});
    }
  }

  std::ostringstream csv;
  csv << "method,metric,policy,value\n";
  for (const Row& r : rows)
    csv << r.method << ',' << r.metric << ',' << r.policy << ','
        << format_double(r.value) << '\n';
  write_text(out / "metrics.csv", csv.str());

  json report;
  report["config_echo"] = cfg;
  report["stage_timings_ms"] = json::object();
  json jm = json::array();
  for (const Row& r : rows)
    jm.push_back({{"method", r.method}, {"metric", r.metric}, {"policy", r.policy},
                  {"value", r.value}});
  report["metrics"] = jm;
  write_text(out / "report.json", report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Full pipeline

void run_pipeline(const std::string& config_json, bool force) {
  const json cfg = json::parse(config_json);
  const fs::path out(out_dir(cfg));
  if (fs::exists(out) && !force)
    throw std::runtime_error("output directory already exists: " + out.string() +
                             " (pass --force to overwrite)");

  json timings = json::object();
  std::string stage = "generate";
  try {
    const auto timed = [&](const std::string& name, const auto& fn) {
      stage = name;
      const auto start = std::chrono::steady_clock::now();
      fn();
      const auto end = std::chrono::steady_clock::now();
      timings[name] =
          std::chrono::duration<double, std::milli>(end - start).count();
    };
    timed("generate", [&] { stage_generate(config_json, force); });
    timed("train", [&] { stage_train(config_json); });
    timed("attribute", [&] { stage_attribute(config_json, {}); });
    timed("evaluate", [&] { stage_evaluate(config_json); });
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!ec) {
      json err{{"stage", stage}, {"error", e.what()}};
      write_text(out / "error.json", err.dump(2) + "\n");
    }
    throw;
  }

  // fill in the timings the evaluate stage could not know about
  json report = read_json_file((out / "report.json").string());
  report["stage_timings_ms"] = timings;
  write_text(out / "report.json", report.dump(2) + "\n");
}

}  // namespace tsattr
