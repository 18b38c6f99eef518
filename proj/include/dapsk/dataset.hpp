// Labeled training data for the amplitude-change classifier.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dapsk/channel.hpp"
#include "dapsk/detect.hpp"
#include "dapsk/modem.hpp"
#include "dapsk/neural.hpp"
#include "dapsk/quantize.hpp"

namespace dapsk {

struct DatasetConfig {
  Constellation spec{8, 2.0};
  int uses = 256;
  std::vector<double> pdp = ChannelConfig::uniform_pdp(31);
  int group1 = 32;
  int group2 = 32;
  int group3 = 32;
  std::vector<double> snr_grid_db{0, 5, 10, 15, 20, 25};

  int antennas() const { return group1 + group2 + group3; }
};

/// Builds the classifier input for channel use v from the two VQL frames.
inline FeatureVector make_features(const EnergyStat& now, const EnergyStat& prev,
                                   std::size_t snr_index, std::size_t grid_size) {
  return FeatureVector::make({now.lambda[0], now.lambda[1], prev.lambda[0], prev.lambda[1]},
                             snr_index, grid_size);
}

/// Independent samples: every sample draws its own channel taps, a random use
/// index v, the previous symbol on a uniformly chosen ring, a fresh bit block
/// and a grid SNR. Label is the one-hot amplitude bit b1[v].
inline LabeledSet generate_dataset(const DatasetConfig& cfg, std::size_t size, std::uint64_t seed) {
  require(!cfg.snr_grid_db.empty(), "generate_dataset: empty SNR grid");
  require(cfg.uses >= 2, "generate_dataset: need at least two channel uses");
  // Validates the PDP and antenna count.
  const ChannelConfig chcfg(cfg.antennas(), static_cast<int>(cfg.pdp.size()), cfg.uses, cfg.pdp, 0.0);
  const auto quant = QuantizerSpec::vql(cfg.group1, cfg.group2, cfg.group3, cfg.spec);
  const auto w = twiddles(cfg.uses);
  const auto U = static_cast<std::size_t>(cfg.antennas());
  const auto L = cfg.pdp.size();
  const int nb = cfg.spec.bits_per_symbol();

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_snr(0, cfg.snr_grid_db.size() - 1);
  std::uniform_int_distribution<int> pick_use(1, cfg.uses - 1);
  std::uniform_int_distribution<int> pick_phase(0, cfg.spec.phases() - 1);
  std::bernoulli_distribution coin(0.5);

  LabeledSet set;
  set.features.reserve(size);
  set.labels.reserve(size);
  std::vector<cplx> taps(L);
  std::vector<cplx> y_prev(U), y_now(U);
  BitBlock block(static_cast<std::size_t>(nb));
  for (std::size_t n = 0; n < size; ++n) {
    const std::size_t k = pick_snr(rng);
    const double noise_var = 1.0 / db_to_linear(cfg.snr_grid_db[k]);
    const double amp = coin(rng) ? cfg.spec.outer() : cfg.spec.inner();
    EncoderState state{amp, std::polar(amp, 2.0 * kPi * pick_phase(rng) / cfg.spec.phases())};
    const cplx x_prev = state.prev_c;
    for (auto& b : block) b = coin(rng) ? 1 : 0;
    const cplx x_now = encode_symbol(block, cfg.spec, state);
    const int v = pick_use(rng);
    for (std::size_t u = 0; u < U; ++u) {
      draw_taps(taps, rng);
      y_prev[u] = gain_at(taps, cfg.pdp, w, v - 1) * x_prev + complex_gaussian(rng, noise_var);
      y_now[u] = gain_at(taps, cfg.pdp, w, v) * x_now + complex_gaussian(rng, noise_var);
    }
    const auto q_prev = quantize_frame(y_prev, quant);
    const auto q_now = quantize_frame(y_now, quant);
    set.features.push_back(make_features(energy_statistic(q_now), energy_statistic(q_prev), k,
                                         cfg.snr_grid_db.size()));
    set.labels.push_back(label_for_bit(block[0]));
  }
  return set;
}

}  // namespace dapsk
