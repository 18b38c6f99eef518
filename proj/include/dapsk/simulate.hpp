// Monte-Carlo link simulation: per-block error tallies, SNR sweeps and
// spectral-efficiency gating.
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dapsk/baseline.hpp"
#include "dapsk/channel.hpp"
#include "dapsk/config.hpp"
#include "dapsk/dataset.hpp"
#include "dapsk/detect.hpp"
#include "dapsk/modem.hpp"
#include "dapsk/neural.hpp"
#include "dapsk/quantize.hpp"

namespace dapsk {

struct BlockTally {
  std::uint64_t symbols = 0;
  std::uint64_t bits = 0;
  std::uint64_t amp_errors = 0;
  std::uint64_t phase_errors = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t symbol_errors = 0;

  BlockTally& operator+=(const BlockTally& o) {
    symbols += o.symbols;
    bits += o.bits;
    amp_errors += o.amp_errors;
    phase_errors += o.phase_errors;
    bit_errors += o.bit_errors;
    symbol_errors += o.symbol_errors;
    return *this;
  }

  void add_symbol(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> got) {
    std::uint64_t phase = 0;
    for (std::size_t k = 1; k < sent.size(); ++k) phase += sent[k] != got[k] ? 1 : 0;
    const std::uint64_t amp = sent[0] != got[0] ? 1 : 0;
    ++symbols;
    bits += sent.size();
    amp_errors += amp;
    phase_errors += phase;
    bit_errors += amp + phase;
    symbol_errors += (amp + phase) > 0 ? 1 : 0;
  }

  bool operator==(const BlockTally&) const = default;
};

/// Amplitude-bit source for the VQL receiver.
enum class AmplitudeSource { model, genie };

/// Trained detectors shared (read-only) by all blocks of a sweep.
struct Receivers {
  std::optional<ModelFile> model;
  AmplitudeSource amplitude = AmplitudeSource::model;
};

inline std::size_t snr_slot(const std::vector<double>& grid, double snr_db) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(grid[k] - snr_db) < 1e-9) return k;
  }
  throw std::invalid_argument("amplitude model was not trained at " + std::to_string(snr_db) +
                              " dB; its SNR grid does not contain this point");
}

namespace detail {

inline BitBlock random_block(int nb, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  BitBlock b(static_cast<std::size_t>(nb));
  for (auto& x : b) x = coin(rng) ? 1 : 0;
  return b;
}

/// Quantized frames arranged per use: result[v] holds the U labels at use v.
inline std::vector<std::vector<cplx>> quantize_uses(const Matrix<cplx>& y, const QuantizerSpec& quant) {
  std::vector<std::vector<cplx>> q(y.cols(), std::vector<cplx>(y.rows()));
  std::vector<cplx> col(y.rows());
  for (std::size_t v = 0; v < y.cols(); ++v) {
    for (std::size_t u = 0; u < y.rows(); ++u) col[u] = y(u, v);
    q[v] = quantize_frame(col, quant);
  }
  return q;
}

inline BlockTally run_differential_block(const SimConfig& cfg, Mode mode, double snr_db, Rng& rng,
                                         const Receivers& rx) {
  const Constellation spec = cfg.constellation();
  const double noise_var = 1.0 / db_to_linear(snr_db);
  const int N = cfg.uses;
  const int nb = spec.bits_per_symbol();
  const auto groups = cfg.group_sizes();

  // Use 0 carries the reference symbol psi0; uses 1..N-1 carry data.
  std::vector<BitBlock> sent;
  sent.reserve(static_cast<std::size_t>(N - 1));
  for (int v = 1; v < N; ++v) sent.push_back(random_block(nb, rng));
  auto enc = dapsk_encode(sent, spec);
  std::vector<cplx> x;
  x.reserve(static_cast<std::size_t>(N));
  x.push_back(EncoderState::initial(spec).prev_c);
  x.insert(x.end(), enc.symbols.begin(), enc.symbols.end());

  const ChannelConfig chcfg(cfg.antennas, cfg.taps, N, cfg.pdp_profile(), noise_var);
  const auto ch = gen_channel(chcfg, rng);
  const auto y = apply_channel(x, ch, noise_var, rng);

  const bool onebit = mode == Mode::differential_onebit;
  const auto quant = onebit ? QuantizerSpec::one_bit(cfg.antennas)
                            : QuantizerSpec::vql(groups[0], groups[1], groups[2], spec);
  const auto q = quantize_uses(y, quant);
  // Previous frames rotated by the mean inter-use channel phase drift.
  const cplx drift = cfg.drift_compensation ? mean_drift(chcfg.pdp(), N) : cplx{1.0, 0.0};
  std::vector<std::vector<cplx>> q_ref(q.size());
  for (std::size_t v = 0; v < q.size(); ++v) {
    q_ref[v].reserve(q[v].size());
    for (const auto& z : q[v]) q_ref[v].push_back(z * drift);
  }

  const auto bg = bussgang_params(1.0 + noise_var);
  const auto rho = make_rho_table(noise_var, bg, spec.ring_ratio());
  const auto amp_model = AmplitudeModel::make(spec, cfg.antennas, noise_var, bg);

  std::size_t snr_index = 0;
  if (mode == Mode::differential_vql_nn && rx.amplitude == AmplitudeSource::model) {
    if (!rx.model) throw std::invalid_argument("differential-vql-nn needs a trained amplitude model");
    snr_index = snr_slot(rx.model->snr_grid_db, snr_db);
  }

  const auto g2_begin = static_cast<std::ptrdiff_t>(groups[0]);
  const auto g2_end = g2_begin + groups[1];
  std::vector<EnergyStat> energy;
  if (!onebit) {
    energy.reserve(q.size());
    for (const auto& frame : q) energy.push_back(energy_statistic(frame));
  }

  BlockTally tally;
  for (int v = 1; v < N; ++v) {
    const auto& bits = sent[static_cast<std::size_t>(v - 1)];
    BitBlock got;
    if (onebit) {
      const auto d = onebit_ml_detect(q[static_cast<std::size_t>(v)], q_ref[static_cast<std::size_t>(v - 1)],
                                      spec, rho);
      got = recover_bits(d.b1, d.candidate.phase, spec.phases());
    } else {
      const auto& qn = q[static_cast<std::size_t>(v)];
      const auto& qp = q_ref[static_cast<std::size_t>(v - 1)];
      const std::span<const cplx> now(qn.begin() + g2_begin, qn.begin() + g2_end);
      const std::span<const cplx> prev(qp.begin() + g2_begin, qp.begin() + g2_end);
      const auto phase = vql_phase_detect(realify(now, prev), spec, rho.same);
      int b1 = 0;
      if (rx.amplitude == AmplitudeSource::genie) {
        b1 = bits[0];
      } else if (mode == Mode::differential_vql_nn) {
        const auto f = make_features(energy[static_cast<std::size_t>(v)],
                                     energy[static_cast<std::size_t>(v - 1)], snr_index,
                                     rx.model->snr_grid_db.size());
        b1 = predict_amplitude_bit(rx.model->model, f);
      } else {
        b1 = lrt_amplitude_test(energy[static_cast<std::size_t>(v)],
                                energy[static_cast<std::size_t>(v - 1)], amp_model) == Hypothesis::H1
                 ? 1
                 : 0;
      }
      got = recover_bits(b1, phase.phase, spec.phases());
    }
    tally.add_symbol(bits, got);
  }
  return tally;
}

inline CoherentAlphabet coherent_alphabet(const SimConfig& cfg) {
  return cfg.coherent_alphabet == "apsk" ? CoherentAlphabet::apsk(cfg.constellation())
                                         : CoherentAlphabet::psk(cfg.mod_order);
}

inline BlockTally run_coherent_block(const SimConfig& cfg, double snr_db, Rng& rng) {
  const double noise_var = 1.0 / db_to_linear(snr_db);
  const PilotPlan plan(cfg.pilot_fraction, cfg.uses);
  const auto alphabet = coherent_alphabet(cfg);
  const auto P = static_cast<std::size_t>(plan.pilots());
  const auto N = static_cast<std::size_t>(cfg.uses);

  std::uniform_int_distribution<std::size_t> pick(0, alphabet.points.size() - 1);
  std::vector<std::size_t> sent(plan.data_positions().size());
  std::vector<cplx> x(N);
  for (std::size_t k = 0; k < P; ++k) x[static_cast<std::size_t>(plan.pilot_positions()[k])] = plan.symbols()[k];
  for (std::size_t d = 0; d < sent.size(); ++d) {
    sent[d] = pick(rng);
    x[static_cast<std::size_t>(plan.data_positions()[d])] = alphabet.points[sent[d]];
  }

  const auto pdp = cfg.pdp_profile();
  const ChannelConfig chcfg(cfg.antennas, cfg.taps, cfg.uses, pdp, noise_var);
  const auto ch = gen_channel(chcfg, rng);
  const auto y = apply_channel(x, ch, noise_var, rng);
  const auto U = static_cast<std::size_t>(cfg.antennas);

  Matrix<cplx> q(U, N);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t v = 0; v < N; ++v) q(u, v) = sign_quantize(y(u, v));
  }
  Matrix<cplx> q_pilots(U, P);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t k = 0; k < P; ++k) q_pilots(u, k) = q(u, static_cast<std::size_t>(plan.pilot_positions()[k]));
  }
  const auto bg = bussgang_params(1.0 + noise_var);
  const auto h_hat = estimate_channel(q_pilots, plan, pdp, bg, noise_var);
  const auto rho = coherent_rho(alphabet.points, estimate_error_var(plan, pdp, bg, noise_var), noise_var);

  BlockTally tally;
  std::vector<cplx> qv(U), hv(U);
  for (std::size_t d = 0; d < sent.size(); ++d) {
    const auto v = static_cast<std::size_t>(plan.data_positions()[d]);
    for (std::size_t u = 0; u < U; ++u) {
      qv[u] = q(u, v);
      hv[u] = h_hat(u, v);
    }
    const auto k = coherent_detect(qv, hv, alphabet.points, rho);
    tally.add_symbol(alphabet.labels[sent[d]], alphabet.labels[k]);
  }
  return tally;
}

}  // namespace detail

/// Simulates one block of N channel uses. Differential modes count the N-1
/// data uses after the reference symbol; coherent counts the non-pilot uses.
inline BlockTally run_block(const SimConfig& cfg, Mode mode, double snr_db, std::uint64_t seed,
                            const Receivers& rx = {}) {
  Rng rng(seed);
  if (mode == Mode::coherent) return detail::run_coherent_block(cfg, snr_db, rng);
  return detail::run_differential_block(cfg, mode, snr_db, rng, rx);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::uint64_t block_seed(std::uint64_t seed, std::size_t snr_index, std::size_t block) {
  return derive_seed(seed, snr_index, block);
}

/// Tally over `count` blocks at one grid point; zero blocks give an empty tally.
inline BlockTally run_blocks(const SimConfig& cfg, Mode mode, std::size_t snr_index, std::size_t count,
                             const Receivers& rx = {}) {
  require(snr_index < cfg.snr_db.size(), "run_blocks: SNR index outside the grid");
  std::vector<BlockTally> parts(count);
  parallel_for(count, cfg.threads, [&](std::size_t b) {
    parts[b] = run_block(cfg, mode, cfg.snr_db[snr_index], block_seed(cfg.seed, snr_index, b), rx);
  });
  BlockTally total;
  for (const auto& p : parts) total += p;
  return total;
}

/// Delivered bits per channel use, zero once SER exceeds the threshold.
inline double spectral_efficiency(double ser, double data_fraction, int bits_per_symbol, double ser_th) {
  require(ser >= 0.0 && ser <= 1.0, "spectral_efficiency: SER must lie in [0, 1]");
  if (ser > ser_th) return 0.0;
  return data_fraction * bits_per_symbol * (1.0 - ser);
}

struct MetricsRecord {
  std::string mode;
  double snr_db = 0.0;
  int antennas = 0;
  int mod_order = 0;
  int blocks = 0;
  double ber = 0.0;
  double amp_ber = 0.0;
  double phase_ber = 0.0;
  double ser = 0.0;
  double se = 0.0;
  BlockTally counts;  // not serialized
};

inline double data_fraction(const SimConfig& cfg, Mode mode) {
  if (mode != Mode::coherent) return 1.0;
  return PilotPlan(cfg.pilot_fraction, cfg.uses).data_fraction();
}

inline MetricsRecord make_record(const SimConfig& cfg, Mode mode, double snr_db, int blocks,
                                 const BlockTally& t) {
  MetricsRecord r;
  r.mode = to_string(mode);
  r.snr_db = snr_db;
  r.antennas = cfg.antennas;
  r.mod_order = cfg.mod_order;
  r.blocks = blocks;
  r.counts = t;
  if (t.symbols > 0) {
    const double sym = static_cast<double>(t.symbols);
    const int nb = static_cast<int>(t.bits / t.symbols);
    r.ber = static_cast<double>(t.bit_errors) / static_cast<double>(t.bits);
    r.amp_ber = static_cast<double>(t.amp_errors) / sym;
    r.phase_ber = nb > 1 ? static_cast<double>(t.phase_errors) / (sym * (nb - 1)) : 0.0;
    r.ser = static_cast<double>(t.symbol_errors) / sym;
    r.se = spectral_efficiency(r.ser, data_fraction(cfg, mode), nb, cfg.ser_threshold);
  }
  return r;
}

/// Dataset generation + training of the amplitude classifier described by cfg.
inline TrainResult train_amplitude_model(const SimConfig& cfg) {
  cfg.validate();
  const auto data = generate_dataset(cfg.dataset_config(), cfg.train_samples, derive_seed(cfg.seed, 0x64617461ULL));
  Rng init(derive_seed(cfg.seed, 0x696e6974ULL));
  const std::size_t input_dim = 4 + cfg.snr_db.size();
  auto model = Mlp::random(input_dim, cfg.hidden, init);
  return train(std::move(model), data, cfg.train_config());
}

/// Loads or trains whatever the configured modes need.
inline Receivers prepare_receivers(const SimConfig& cfg) {
  Receivers rx;
  if (!cfg.uses_mode(Mode::differential_vql_nn)) return rx;
  if (cfg.train_model) {
    rx.model = ModelFile{train_amplitude_model(cfg).model, cfg.snr_db, kModelSchemaVersion};
    return rx;
  }
  if (cfg.model_path.empty()) {
    throw std::invalid_argument(
        "differential-vql-nn needs an amplitude model: set model = <path> or train_model = true");
  }
  std::ifstream probe(cfg.model_path);
  if (!probe) throw std::runtime_error("amplitude model file not found: " + cfg.model_path);
  rx.model = load_model(cfg.model_path);
  return rx;
}

/// Every configured mode over every SNR grid point.
inline std::vector<MetricsRecord> sweep(const SimConfig& cfg, const Receivers& rx) {
  cfg.validate();
  std::vector<MetricsRecord> out;
  for (Mode mode : cfg.modes) {
    for (std::size_t k = 0; k < cfg.snr_db.size(); ++k) {
      const auto t = run_blocks(cfg, mode, k, static_cast<std::size_t>(cfg.blocks), rx);
      out.push_back(make_record(cfg, mode, cfg.snr_db[k], cfg.blocks, t));
    }
  }
  return out;
}

inline std::vector<MetricsRecord> sweep(const SimConfig& cfg) {
  cfg.validate();
  return sweep(cfg, prepare_receivers(cfg));
}

}  // namespace dapsk
