// Fully-connected amplitude-change classifier: forward pass, cross-entropy,
// backpropagation, Adam, training loop and a versioned JSON model file.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapsk/common.hpp"
#include "json.hpp"

namespace dapsk {

enum class Activation { relu, softmax };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "softmax"; }

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
  Activation activation = Activation::relu;

  bool operator==(const DenseLayer&) const = default;
};

/// Two-class label; {1,0} means the amplitude bit is 0.
using Label = std::array<double, 2>;

inline Label label_for_bit(int b1) { return b1 == 0 ? Label{1.0, 0.0} : Label{0.0, 1.0}; }

inline void softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    require(!layers_.empty(), "mlp: need at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      require(L.in >= 1 && L.out >= 1, "mlp: layer dimensions must be positive");
      require(L.weights.size() == L.in * L.out && L.bias.size() == L.out,
              "mlp: parameter array sizes do not match layer dimensions");
      if (l > 0) require(layers_[l - 1].out == L.in, "mlp: consecutive layer dimensions do not chain");
      const bool last = l + 1 == layers_.size();
      require(L.activation == (last ? Activation::softmax : Activation::relu),
              "mlp: hidden layers must be relu and the final layer softmax");
    }
    require(layers_.back().out == 2, "mlp: output dimension must be 2");
  }

  /// He-uniform weights, zero biases.
  static Mlp random(std::size_t input_dim, std::span<const std::size_t> hidden, Rng& rng) {
    std::vector<DenseLayer> layers;
    std::size_t in = input_dim;
    auto make = [&](std::size_t out, Activation act) {
      DenseLayer L{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0), act};
      const double limit = std::sqrt(6.0 / static_cast<double>(in));
      std::uniform_real_distribution<double> d(-limit, limit);
      for (double& w : L.weights) w = d(rng);
      layers.push_back(std::move(L));
      in = out;
    };
    for (std::size_t h : hidden) make(h, Activation::relu);
    make(2, Activation::softmax);
    return Mlp(std::move(layers));
  }

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  /// Activations of every layer; element 0 is the input itself.
  std::vector<std::vector<double>> forward_all(std::span<const double> x) const {
    require(x.size() == input_dim(), "mlp: input dimension mismatch");
    std::vector<std::vector<double>> acts;
    acts.reserve(layers_.size() + 1);
    acts.emplace_back(x.begin(), x.end());
    for (const auto& L : layers_) {
      const auto& a = acts.back();
      std::vector<double> z(L.out);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double* w = L.weights.data() + o * L.in;
        double s = L.bias[o];
        for (std::size_t i = 0; i < L.in; ++i) s += w[i] * a[i];
        z[o] = L.activation == Activation::relu ? std::max(s, 0.0) : s;
      }
      if (L.activation == Activation::softmax) softmax_inplace(z);
      acts.push_back(std::move(z));
    }
    return acts;
  }

  std::vector<double> forward(std::span<const double> x) const { return forward_all(x).back(); }

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

inline std::vector<double> mlp_forward(const Mlp& m, std::span<const double> x) { return m.forward(x); }

/// Argmax decision: index 0 -> bit 0, index 1 -> bit 1, ties to bit 0.
inline int amplitude_bit_from_output(std::span<const double> probs) {
  require(probs.size() == 2, "amplitude decision: expected two outputs");
  return probs[1] > probs[0] ? 1 : 0;
}

inline constexpr double kProbClip = 1e-12;

/// Mean cross-entropy -(1/V) sum omega^T log(p), probabilities clipped away from 0 and 1.
inline double bce_loss(std::span<const std::vector<double>> probs, std::span<const Label> labels) {
  require(probs.size() == labels.size(), "bce_loss: batch sizes differ");
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    require(probs[n].size() == 2, "bce_loss: expected two probabilities");
    for (std::size_t k = 0; k < 2; ++k) {
      if (labels[n][k] == 0.0) continue;
      total -= labels[n][k] * std::log(std::clamp(probs[n][k], kProbClip, 1.0 - kProbClip));
    }
  }
  return total / static_cast<double>(probs.size());
}

/// Same shapes as the model parameters.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const Mlp& m) {
    Gradients g;
    for (const auto& L : m.layers()) {
      g.weights.emplace_back(L.weights.size(), 0.0);
      g.bias.emplace_back(L.bias.size(), 0.0);
    }
    return g;
  }
};

struct BackwardResult {
  Gradients grads;
  double loss = 0.0;
};

/// Exact gradient of the mean cross-entropy over the batch.
inline BackwardResult backward(const Mlp& m, std::span<const std::vector<double>> inputs,
                               std::span<const Label> labels) {
  require(inputs.size() == labels.size(), "backward: batch sizes differ");
  BackwardResult r{Gradients::zeros_like(m), 0.0};
  if (inputs.empty()) return r;
  const double inv_v = 1.0 / static_cast<double>(inputs.size());
  const auto& layers = m.layers();
  std::vector<double> delta;
  std::vector<double> prev_delta;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const auto acts = m.forward_all(inputs[n]);
    const auto& p = acts.back();
    for (std::size_t k = 0; k < 2; ++k) {
      if (labels[n][k] != 0.0)
        r.loss -= labels[n][k] * std::log(std::clamp(p[k], kProbClip, 1.0 - kProbClip)) * inv_v;
    }
    // Softmax + cross-entropy: dL/dz = (p - omega) / V for labels summing to one.
    delta.assign(2, 0.0);
    for (std::size_t k = 0; k < 2; ++k) delta[k] = (p[k] - labels[n][k]) * inv_v;

    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& L = layers[l];
      const auto& a = acts[l];
      auto& gw = r.grads.weights[l];
      auto& gb = r.grads.bias[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* row = gw.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) row[i] += d * a[i];
      }
      if (l == 0) break;
      prev_delta.assign(L.in, 0.0);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = L.weights.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) prev_delta[i] += w[i] * d;
      }
      // ReLU derivative, zero at the kink.
      for (std::size_t i = 0; i < L.in; ++i) {
        if (a[i] <= 0.0) prev_delta[i] = 0.0;
      }
      std::swap(delta, prev_delta);
    }
  }
  return r;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 250;
  std::size_t batch_size = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const {
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), "train: learning rate must be >= 0");
    require(epochs >= 1, "train: epochs must be >= 1");
    require(batch_size >= 1, "train: batch size must be >= 1");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0,
            "train: invalid Adam constants");
  }
};

struct AdamState {
  Gradients m;
  Gradients v;
  long step = 0;

  static AdamState for_model(const Mlp& model) {
    return {Gradients::zeros_like(model), Gradients::zeros_like(model), 0};
  }
};

inline void adam_update(std::vector<double>& theta, const std::vector<double>& g,
                        std::vector<double>& m, std::vector<double>& v, const TrainConfig& cfg,
                        double c1, double c2) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
    const double mhat = m[k] / c1;
    const double vhat = v[k] / c2;
    theta[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

/// One bias-corrected Adam step.
inline void adam_step(Mlp& model, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
  auto& layers = model.layers();
  require(grads.weights.size() == layers.size() && state.m.weights.size() == layers.size(),
          "adam_step: gradient/state shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(layers[l].weights, grads.weights[l], state.m.weights[l], state.v.weights[l], cfg, c1, c2);
    adam_update(layers[l].bias, grads.bias[l], state.m.bias[l], state.v.bias[l], cfg, c1, c2);
  }
}

/// Input vector w0 = {Lambda_1[v], Lambda_2[v], Lambda_1[v-1], Lambda_2[v-1], one-hot SNR}.
struct FeatureVector {
  std::array<double, 4> lambda{};
  std::vector<double> snr_onehot;

  static FeatureVector make(const std::array<double, 4>& lambda, std::size_t snr_index,
                            std::size_t grid_size) {
    require(snr_index < grid_size, "features: SNR index outside the grid");
    for (double l : lambda) require(l >= 0.0 && std::isfinite(l), "features: Lambda must be >= 0");
    FeatureVector f{lambda, std::vector<double>(grid_size, 0.0)};
    f.snr_onehot[snr_index] = 1.0;
    return f;
  }

  std::vector<double> input() const {
    std::vector<double> x(lambda.begin(), lambda.end());
    x.insert(x.end(), snr_onehot.begin(), snr_onehot.end());
    return x;
  }

  bool operator==(const FeatureVector&) const = default;
};

struct LabeledSet {
  std::vector<FeatureVector> features;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return features.size(); }
};

inline int predict_amplitude_bit(const Mlp& model, const FeatureVector& f) {
  return amplitude_bit_from_output(model.forward(f.input()));
}

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // mean mini-batch loss per epoch
};

/// Mini-batch Adam; batch order per epoch is drawn from cfg.seed.
inline TrainResult train(Mlp model, const LabeledSet& set, const TrainConfig& cfg) {
  cfg.validate();
  require(set.size() > 0, "train: empty dataset");
  require(set.labels.size() == set.size(), "train: features and labels differ in length");
  std::vector<std::vector<double>> inputs;
  inputs.reserve(set.size());
  for (const auto& f : set.features) inputs.push_back(f.input());

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState state = AdamState::for_model(model);
  TrainResult out;
  std::vector<std::vector<double>> batch_x;
  std::vector<Label> batch_y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch_x.push_back(inputs[order[k]]);
        batch_y.push_back(set.labels[order[k]]);
      }
      const auto r = backward(model, batch_x, batch_y);
      if (!std::isfinite(r.loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += r.loss * static_cast<double>(stop - start);
      adam_step(model, r.grads, state, cfg);
    }
    out.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  out.model = std::move(model);
  return out;
}

// ---------------------------------------------------------------------------
// Model file

inline constexpr int kModelSchemaVersion = 1;

struct ModelFile {
  Mlp model;
  std::vector<double> snr_grid_db;  // grid behind the one-hot SNR inputs
  int version = kModelSchemaVersion;
};

inline nlohmann::json model_to_json(const ModelFile& f) {
  nlohmann::json j;
  j["format"] = "dapsk-mlp";
  j["version"] = f.version;
  j["input_dim"] = f.model.input_dim();
  j["snr_grid_db"] = f.snr_grid_db;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& L : f.model.layers()) {
    layers.push_back({{"in", L.in},
                      {"out", L.out},
                      {"activation", to_string(L.activation)},
                      {"weights", L.weights},
                      {"bias", L.bias}});
  }
  return j;
}

inline void save_model(const ModelFile& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open model file for writing: " + path);
  os << model_to_json(f).dump(1) << '\n';
  if (!os) throw std::runtime_error("failed writing model file: " + path);
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) { throw std::runtime_error("invalid model file: " + why); };
  if (!j.is_object() || j.value("format", "") != "dapsk-mlp") fail("missing dapsk-mlp format tag");
  if (!j.contains("version") || !j["version"].is_number_integer()) fail("missing schema version");
  const int version = j["version"].get<int>();
  if (version != kModelSchemaVersion) {
    fail("unsupported schema version " + std::to_string(version) + " (expected " +
         std::to_string(kModelSchemaVersion) + ")");
  }
  ModelFile f;
  f.version = version;
  try {
    f.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      DenseLayer L;
      L.in = jl.at("in").get<std::size_t>();
      L.out = jl.at("out").get<std::size_t>();
      const auto act = jl.at("activation").get<std::string>();
      if (act == "relu") {
        L.activation = Activation::relu;
      } else if (act == "softmax") {
        L.activation = Activation::softmax;
      } else {
        fail("unknown activation '" + act + "'");
      }
      L.weights = jl.at("weights").get<std::vector<double>>();
      L.bias = jl.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(L));
    }
    f.model = Mlp(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (f.model.input_dim() != j.value("input_dim", std::size_t{0})) fail("input_dim disagrees with layers");
  return f;
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model file " + path + " is not valid JSON: " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace dapsk
