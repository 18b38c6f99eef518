#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "dapsk/dataset.hpp"
#include "dapsk/neural.hpp"

using namespace dapsk;
using Catch::Approx;

namespace {

Mlp random_model(std::size_t in, std::vector<std::size_t> hidden, std::uint64_t seed) {
  Rng rng(seed);
  return Mlp::random(in, hidden, rng);
}

double batch_loss(const Mlp& m, const std::vector<std::vector<double>>& x, const std::vector<Label>& y) {
  std::vector<std::vector<double>> p;
  for (const auto& xi : x) p.push_back(m.forward(xi));
  return bce_loss(p, y);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dapsk_test_" + name)).string();
}

}  // namespace

TEST_CASE("softmax sums to one and survives large logits") {
  std::vector<double> z{1000.0, -1000.0, 3.0};
  softmax_inplace(z);
  CHECK(z[0] + z[1] + z[2] == Approx(1.0).margin(1e-9));
  CHECK(std::isfinite(z[1]));
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v{n(rng), n(rng)};
    softmax_inplace(v);
    CHECK(std::abs(v[0] + v[1] - 1.0) < 1e-9);
  }
}

TEST_CASE("model construction validates shapes and activations") {
  DenseLayer out{2, 2, std::vector<double>(4, 0.0), {0.0, 0.0}, Activation::softmax};
  CHECK_NOTHROW(Mlp({out}));
  CHECK_THROWS_AS(Mlp(std::vector<DenseLayer>{}), std::invalid_argument);
  DenseLayer bad = out;
  bad.weights.pop_back();
  CHECK_THROWS_AS(Mlp({bad}), std::invalid_argument);
  DenseLayer hidden{3, 4, std::vector<double>(12, 0.0), std::vector<double>(4, 0.0), Activation::relu};
  CHECK_THROWS_AS(Mlp({hidden, out}), std::invalid_argument);  // 4 -> 2 does not chain
  DenseLayer relu_out = out;
  relu_out.activation = Activation::relu;
  CHECK_THROWS_AS(Mlp({relu_out}), std::invalid_argument);
  const auto m = random_model(5, {8, 8}, 2);
  CHECK(m.input_dim() == 5);
  CHECK(m.output_dim() == 2);
  CHECK_THROWS_AS(m.forward(std::vector<double>(4, 0.0)), std::invalid_argument);
}

TEST_CASE("amplitude decision from output probabilities") {
  CHECK(amplitude_bit_from_output(std::vector<double>{0.9, 0.1}) == 0);
  CHECK(amplitude_bit_from_output(std::vector<double>{0.2, 0.8}) == 1);
  CHECK(amplitude_bit_from_output(std::vector<double>{0.5, 0.5}) == 0);
  CHECK_THROWS_AS(amplitude_bit_from_output(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("prediction is invariant to a constant shift of the logits") {
  auto m = random_model(10, {6}, 3);
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::array<double, 4> lam{std::abs(n(rng)), std::abs(n(rng)), std::abs(n(rng)), std::abs(n(rng))};
    const auto f = FeatureVector::make(lam, static_cast<std::size_t>(t % 6), 6);
    const int before = predict_amplitude_bit(m, f);
    auto shifted = m;
    for (double& b : shifted.layers().back().bias) b += 17.5;
    CHECK(predict_amplitude_bit(shifted, f) == before);
  }
}

TEST_CASE("cross-entropy values") {
  const std::vector<std::vector<double>> exact{{1.0, 0.0}};
  const std::vector<Label> y0{Label{1.0, 0.0}};
  CHECK(bce_loss(exact, y0) == Approx(0.0).margin(1e-11));
  const std::vector<std::vector<double>> half{{0.5, 0.5}};
  CHECK(bce_loss(half, y0) == Approx(0.693147180559945).epsilon(1e-12));
  const std::vector<std::vector<double>> two{{0.5, 0.5}, {0.1, 0.9}};
  const std::vector<Label> y2{Label{1.0, 0.0}, Label{0.0, 1.0}};
  CHECK(bce_loss(two, y2) == Approx(0.5 * (std::log(2.0) - std::log(0.9))).epsilon(1e-12));
  const std::vector<std::vector<double>> wrong{{0.0, 1.0}};
  CHECK(bce_loss(wrong, y0) == Approx(-std::log(1e-12)).epsilon(1e-12));
  CHECK(bce_loss(std::span<const std::vector<double>>{}, std::span<const Label>{}) == 0.0);
}

TEST_CASE("softmax-only model with zero weights has bias gradient [-0.5, 0.5]") {
  DenseLayer out{3, 2, std::vector<double>(6, 0.0), {0.0, 0.0}, Activation::softmax};
  const Mlp m({out});
  const std::vector<std::vector<double>> x{{0.3, -1.0, 2.0}};
  const std::vector<Label> y{Label{1.0, 0.0}};
  const auto r = backward(m, x, y);
  CHECK(r.grads.bias[0][0] == Approx(-0.5).epsilon(1e-15));
  CHECK(r.grads.bias[0][1] == Approx(0.5).epsilon(1e-15));
  CHECK(r.loss == Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("gradient matches central finite differences") {
  auto m = random_model(10, {64, 64, 64}, 5);
  Rng rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<double>> x(32, std::vector<double>(10));
  std::vector<Label> y(32);
  for (std::size_t k = 0; k < 32; ++k) {
    for (double& v : x[k]) v = n(rng);
    y[k] = label_for_bit(coin(rng) ? 1 : 0);
  }
  const auto g = backward(m, x, y).grads;
  const double h = 1e-5;
  double worst = 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, 1 << 20);
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    auto check = [&](std::vector<double>& theta, const std::vector<double>& grad, std::size_t k) {
      const double keep = theta[k];
      theta[k] = keep + h;
      const double up = batch_loss(m, x, y);
      theta[k] = keep - h;
      const double down = batch_loss(m, x, y);
      theta[k] = keep;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-7});
      worst = std::max(worst, std::abs(fd - grad[k]) / denom);
    };
    auto& L = m.layers()[l];
    for (int t = 0; t < 40; ++t) check(L.weights, g.weights[l], pick(rng) % L.weights.size());
    for (std::size_t k = 0; k < L.bias.size(); ++k) check(L.bias, g.bias[l], k);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient vanishes when outputs equal the labels") {
  DenseLayer out{1, 2, {0.0, 0.0}, {60.0, -60.0}, Activation::softmax};
  const Mlp m({out});
  const std::vector<std::vector<double>> x{{1.0}, {-2.0}};
  const std::vector<Label> y{Label{1.0, 0.0}, Label{1.0, 0.0}};
  const auto r = backward(m, x, y);
  for (const auto& layer : r.grads.bias)
    for (double v : layer) CHECK(std::abs(v) < 1e-40);
}

TEST_CASE("Adam first step and statefulness") {
  TrainConfig cfg;
  std::vector<double> theta{0.0}, m{0.0}, v{0.0};
  const std::vector<double> g{1.0};
  adam_update(theta, g, m, v, cfg, 1.0 - cfg.beta1, 1.0 - cfg.beta2);
  CHECK(theta[0] == Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));

  auto model = random_model(3, {4}, 7);
  const auto before = model;
  auto state = AdamState::for_model(model);
  adam_step(model, Gradients::zeros_like(model), state, cfg);
  CHECK(model == before);

  // With a constant gradient the bias-corrected step is exactly alpha, so
  // statefulness shows only when the gradient changes between steps.
  Gradients g1 = Gradients::zeros_like(model), g2 = Gradients::zeros_like(model);
  for (auto& w : g1.weights) std::fill(w.begin(), w.end(), 1.0);
  for (auto& w : g2.weights) std::fill(w.begin(), w.end(), 0.01);
  auto stateful = before;
  auto s2 = AdamState::for_model(stateful);
  adam_step(stateful, g1, s2, cfg);
  adam_step(stateful, g2, s2, cfg);
  auto fresh = before;
  auto s1 = AdamState::for_model(fresh);
  adam_step(fresh, g1, s1, cfg);
  s1 = AdamState::for_model(fresh);
  adam_step(fresh, g2, s1, cfg);
  CHECK(s2.step == 2);
  CHECK_FALSE(stateful == fresh);
  // Second step with remembered moments: m = 0.1*0.9 + 0.1*0.01, v = 0.001*0.999 + 0.001*1e-4.
  const double m2 = (0.09 + 0.001) / (1 - 0.81), v2 = (0.000999 + 1e-7) / (1 - 0.998001);
  CHECK(stateful.layers()[0].weights[0] ==
        Approx(before.layers()[0].weights[0] - 0.001 / (1 + 1e-8) - 0.001 * m2 / (std::sqrt(v2) + 1e-8))
            .epsilon(1e-12));
}

TEST_CASE("training on two separable blobs") {
  Rng rng(8);
  std::normal_distribution<double> n(0.0, 0.5);
  LabeledSet set;
  for (int k = 0; k < 2000; ++k) {
    const int b = k % 2;
    const double c = b ? 3.0 : 1.0;
    std::array<double, 4> lam{std::abs(c + n(rng)), std::abs(c + n(rng)), 1.0, 1.0};
    set.features.push_back(FeatureVector::make(lam, 0, 1));
    set.labels.push_back(label_for_bit(b));
  }
  TrainConfig cfg;
  cfg.epochs = 250;
  cfg.batch_size = 100;
  cfg.learning_rate = 0.01;
  auto r = train(random_model(5, {8}, 9), set, cfg);
  int correct = 0;
  for (std::size_t k = 0; k < set.size(); ++k) {
    correct += predict_amplitude_bit(r.model, set.features[k]) == (set.labels[k][1] > 0.5 ? 1 : 0) ? 1 : 0;
  }
  CHECK(correct > 0.99 * static_cast<double>(set.size()));
  CHECK(r.loss_history.size() == 250);
  for (double l : r.loss_history) CHECK(std::isfinite(l));
  CHECK(r.loss_history.back() <= r.loss_history.front());

  const auto again = train(random_model(5, {8}, 9), set, cfg);
  CHECK(again.loss_history == r.loss_history);
  CHECK(again.model == r.model);

  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  const auto start = random_model(5, {8}, 9);
  CHECK(train(start, set, cfg).model == start);
}

TEST_CASE("training input validation") {
  TrainConfig cfg;
  CHECK_THROWS_AS(train(random_model(5, {4}, 1), LabeledSet{}, cfg), std::invalid_argument);
  cfg.epochs = 0;
  LabeledSet one;
  one.features.push_back(FeatureVector::make({1, 1, 1, 1}, 0, 1));
  one.labels.push_back(label_for_bit(0));
  CHECK_THROWS_AS(train(random_model(5, {4}, 1), one, cfg), std::invalid_argument);
  CHECK_THROWS_AS(FeatureVector::make({-1, 1, 1, 1}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(FeatureVector::make({1, 1, 1, 1}, 1, 1), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts training") {
  auto m = random_model(5, {4}, 10);
  LabeledSet set;
  set.features.push_back(FeatureVector::make({1, 1, 1, 1}, 0, 1));
  set.features.back().lambda[0] = std::numeric_limits<double>::infinity();
  set.labels.push_back(label_for_bit(1));
  CHECK_THROWS_AS(train(m, set, TrainConfig{}), std::runtime_error);
}

TEST_CASE("model file roundtrip and load errors") {
  const ModelFile f{random_model(10, {16, 16}, 11), {0, 5, 10, 15, 20, 25}, kModelSchemaVersion};
  const auto path = temp_path("model.json");
  save_model(f, path);
  const auto g = load_model(path);
  CHECK(g.model == f.model);
  CHECK(g.snr_grid_db == f.snr_grid_db);
  CHECK(g.version == kModelSchemaVersion);

  std::ifstream is(path);
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  auto write = [&](const std::string& s) {
    std::ofstream os(path);
    os << s;
  };
  write(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_model(path), std::runtime_error);
  write("garbage" + text);
  CHECK_THROWS_AS(load_model(path), std::runtime_error);

  auto j = model_to_json(f);
  j["version"] = 99;
  write(j.dump());
  CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("unsupported schema version 99"));
  j = model_to_json(f);
  j["layers"][0]["weights"].erase(0);
  write(j.dump());
  CHECK_THROWS_AS(load_model(path), std::runtime_error);
  j = model_to_json(f);
  j["layers"][1]["activation"] = "tanh";
  write(j.dump());
  CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("tanh"));
  std::filesystem::remove(path);
  CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring(path));
}

TEST_CASE("dataset balance, nonnegative features and determinism") {
  DatasetConfig cfg;
  const std::size_t V = 2000;
  const auto a = generate_dataset(cfg, V, 12);
  REQUIRE(a.size() == V);
  int ones = 0;
  for (std::size_t k = 0; k < V; ++k) {
    ones += a.labels[k][1] > 0.5 ? 1 : 0;
    CHECK(a.labels[k][0] + a.labels[k][1] == 1.0);
    for (double l : a.features[k].lambda) CHECK(l >= 0.0);
    CHECK(a.features[k].snr_onehot.size() == cfg.snr_grid_db.size());
  }
  CHECK(std::abs(ones - 0.5 * V) < 3.0 * std::sqrt(0.25 * V));
  const auto b = generate_dataset(cfg, V, 12);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(generate_dataset(cfg, 50, 13).features == generate_dataset(cfg, 50, 12).features);
  cfg.snr_grid_db.clear();
  CHECK_THROWS_AS(generate_dataset(cfg, 10, 1), std::invalid_argument);
}
