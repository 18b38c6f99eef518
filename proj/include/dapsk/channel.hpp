// Frequency-selective block-fading uplink channel and AWGN.
#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "dapsk/common.hpp"

namespace dapsk {

class ChannelConfig {
 public:
  ChannelConfig(int antennas, int taps, int uses, std::vector<double> pdp, double noise_var)
      : antennas_(antennas), taps_(taps), uses_(uses), pdp_(std::move(pdp)), noise_var_(noise_var) {
    require(antennas_ >= 1, "channel: need at least one antenna");
    require(taps_ >= 1 && taps_ <= uses_, "channel: require 1 <= L <= N");
    require(pdp_.size() == static_cast<std::size_t>(taps_), "channel: PDP length must equal L");
    for (double p : pdp_) require(p >= 0.0 && std::isfinite(p), "channel: PDP entries must be >= 0");
    const double total = std::accumulate(pdp_.begin(), pdp_.end(), 0.0);
    require(std::abs(total - 1.0) < 1e-9, "channel: PDP must sum to 1");
    require(noise_var_ >= 0.0 && std::isfinite(noise_var_), "channel: noise variance must be >= 0");
  }

  static std::vector<double> uniform_pdp(int taps) {
    require(taps >= 1, "channel: need at least one tap");
    return std::vector<double>(static_cast<std::size_t>(taps), 1.0 / taps);
  }

  /// p[l] proportional to exp(-l / decay), normalised.
  static std::vector<double> exponential_pdp(int taps, double decay) {
    require(taps >= 1 && decay > 0.0, "channel: invalid exponential PDP");
    std::vector<double> p(static_cast<std::size_t>(taps));
    for (int l = 0; l < taps; ++l) p[static_cast<std::size_t>(l)] = std::exp(-l / decay);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= total;
    return p;
  }

  int antennas() const noexcept { return antennas_; }
  int taps() const noexcept { return taps_; }
  int uses() const noexcept { return uses_; }
  const std::vector<double>& pdp() const noexcept { return pdp_; }
  double noise_var() const noexcept { return noise_var_; }

 private:
  int antennas_;
  int taps_;
  int uses_;
  std::vector<double> pdp_;
  double noise_var_;
};

/// Tap gains g_u[l] (U x L) and the per-use gains h_u[v] (U x N) derived from them.
struct ChannelRealization {
  Matrix<cplx> taps;
  Matrix<cplx> gains;

  int antennas() const noexcept { return static_cast<int>(gains.rows()); }
  int uses() const noexcept { return static_cast<int>(gains.cols()); }
};

/// exp(-j 2 pi k / N) for k = 0..N-1.
inline std::vector<cplx> twiddles(int uses) {
  std::vector<cplx> w(static_cast<std::size_t>(uses));
  for (int k = 0; k < uses; ++k) w[static_cast<std::size_t>(k)] = std::polar(1.0, -2.0 * kPi * k / uses);
  return w;
}

/// h[v] = sum_l sqrt(p[l]) g[l] exp(-j 2 pi l v / N).
inline cplx gain_at(std::span<const cplx> taps, std::span<const double> pdp,
                    std::span<const cplx> twiddle, int v) {
  const auto n = twiddle.size();
  cplx h{};
  for (std::size_t l = 0; l < taps.size(); ++l) {
    h += std::sqrt(pdp[l]) * taps[l] * twiddle[(l * static_cast<std::size_t>(v)) % n];
  }
  return h;
}

inline void draw_taps(std::span<cplx> taps, Rng& rng) {
  for (auto& g : taps) g = complex_gaussian(rng, 1.0);
}

inline ChannelRealization gen_channel(const ChannelConfig& cfg, Rng& rng) {
  const auto U = static_cast<std::size_t>(cfg.antennas());
  const auto L = static_cast<std::size_t>(cfg.taps());
  const auto N = static_cast<std::size_t>(cfg.uses());
  ChannelRealization ch{Matrix<cplx>(U, L), Matrix<cplx>(U, N)};
  for (std::size_t u = 0; u < U; ++u) draw_taps(ch.taps.row(u), rng);

  const auto w = twiddles(cfg.uses());
  std::vector<double> amp(L);
  for (std::size_t l = 0; l < L; ++l) amp[l] = std::sqrt(cfg.pdp()[l]);
  for (std::size_t u = 0; u < U; ++u) {
    const auto g = ch.taps.row(u);
    auto h = ch.gains.row(u);
    for (std::size_t v = 0; v < N; ++v) {
      cplx acc{};
      for (std::size_t l = 0; l < L; ++l) acc += amp[l] * g[l] * w[(l * v) % N];
      h[v] = acc;
    }
  }
  return ch;
}

/// y_u[v] = h_u[v] x[v] + z_u[v]; returns a U x N matrix.
inline Matrix<cplx> apply_channel(std::span<const cplx> x, const ChannelRealization& ch,
                                  double noise_var, Rng& rng) {
  require(x.size() == static_cast<std::size_t>(ch.uses()),
          "apply_channel: symbol count must equal channel uses N");
  require(noise_var >= 0.0, "apply_channel: noise variance must be >= 0");
  Matrix<cplx> y(ch.gains.rows(), ch.gains.cols());
  for (std::size_t u = 0; u < y.rows(); ++u) {
    for (std::size_t v = 0; v < y.cols(); ++v) {
      y(u, v) = ch.gains(u, v) * x[v];
      if (noise_var > 0.0) y(u, v) += complex_gaussian(rng, noise_var);
    }
  }
  return y;
}

/// Unit phasor of E[h[v] h*[v-1]] = sum_l p[l] exp(-j 2 pi l / N): the
/// mean rotation of the gains between adjacent uses.
inline cplx mean_drift(std::span<const double> pdp, int uses) {
  require(uses >= 1, "mean_drift: need at least one use");
  cplx c{};
  for (std::size_t l = 0; l < pdp.size(); ++l) c += pdp[l] * std::polar(1.0, -2.0 * kPi * static_cast<double>(l) / uses);
  const double m = std::abs(c);
  return m > 1e-12 ? c / m : cplx{1.0, 0.0};
}

enum class RingChange { none, up, down };

inline RingChange ring_change_for(double amp_ratio) {
  if (std::abs(amp_ratio - 1.0) < 1e-9) return RingChange::none;
  return amp_ratio > 1.0 ? RingChange::up : RingChange::down;
}

/// Squared magnitude of the amplitude ratio a' implied by a ring transition.
inline double amp_ratio_sq(RingChange change, double ring_ratio) {
  switch (change) {
    case RingChange::up: return ring_ratio * ring_ratio;
    case RingChange::down: return 1.0 / (ring_ratio * ring_ratio);
    case RingChange::none: break;
  }
  return 1.0;
}

/// Variance of z'[v] = z[v] - a' s z[v-1]: sigma_z^2 (1 + |a'|^2).
///
/// `up` is the inner-to-outer transition (a' = psi1/psi0), `down` the reverse.
inline double diff_noise_var(int b1, RingChange change, double noise_var, double ring_ratio) {
  require(noise_var > 0.0, "diff_noise_var: sigma_z^2 must be positive");
  if (b1 == 0) return 2.0 * noise_var;
  require(change != RingChange::none, "diff_noise_var: b1 = 1 needs a ring direction");
  return noise_var * (1.0 + amp_ratio_sq(change, ring_ratio));
}

}  // namespace dapsk
