// Independent Monte-Carlo and quadrature estimators used to cross-check the
// closed forms elsewhere in the library.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dapsk/channel.hpp"
#include "dapsk/common.hpp"
#include "dapsk/detect.hpp"

namespace dapsk::oracle {

struct BussgangEstimate {
  double eta = 0.0;
  double sigma_eps2 = 0.0;
};

/// eta = E[q y*] / E|y|^2 and sigma_eps2 = E|q - eta y|^2 for q = sign(y),
/// y ~ CN(0, power).
inline BussgangEstimate bussgang_mc(std::size_t samples, double power, std::uint64_t seed) {
  require(samples >= 2, "bussgang_mc: need at least two samples");
  require(power > 0.0, "bussgang_mc: power must be positive");
  Rng rng(seed);
  std::vector<cplx> y(samples);
  double cross = 0.0, energy = 0.0;
  for (auto& s : y) {
    s = complex_gaussian(rng, power);
    const cplx q{s.real() >= 0.0 ? 1.0 : -1.0, s.imag() >= 0.0 ? 1.0 : -1.0};
    cross += (q * std::conj(s)).real();
    energy += std::norm(s);
  }
  const double eta = cross / energy;
  double eps = 0.0;
  for (const auto& s : y) {
    const cplx q{s.real() >= 0.0 ? 1.0 : -1.0, s.imag() >= 0.0 ? 1.0 : -1.0};
    eps += std::norm(q - eta * s);
  }
  return {eta, eps / static_cast<double>(samples)};
}

struct Frequency {
  double p = 0.0;
  double stderr_ = 0.0;
};

/// Frequency of the sign pattern q_now when each real component is
/// sign(a' sqrt(rho) (q_prev s)_i + n), n ~ N(0, 1).
inline Frequency sign_pattern_frequency(std::span<const cplx> q_now, std::span<const cplx> q_prev,
                                        const Candidate& cand, double rho, std::size_t draws,
                                        std::uint64_t seed) {
  require(q_now.size() == q_prev.size() && !q_now.empty(), "sign_pattern_frequency: frame size mismatch");
  require(draws >= 1, "sign_pattern_frequency: need draws");
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double scale = cand.amp_ratio * std::sqrt(rho);
  std::vector<cplx> mean(q_now.size());
  for (std::size_t u = 0; u < q_now.size(); ++u) mean[u] = scale * q_prev[u] * cand.phase;
  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    bool match = true;
    for (std::size_t u = 0; u < q_now.size(); ++u) {
      const double re = mean[u].real() + n01(rng);
      const double im = mean[u].imag() + n01(rng);
      match = match && (re >= 0.0) == (q_now[u].real() >= 0.0) && (im >= 0.0) == (q_now[u].imag() >= 0.0);
    }
    hits += match ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(draws);
  return {p, std::sqrt(std::max(p * (1.0 - p), 1e-300) / static_cast<double>(draws))};
}

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                        int max_depth = 50) {
  require(b > a, "integrate: empty interval");
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

struct DensityMoments {
  double mass = 0.0;
  double mean = 0.0;
};

/// Mass and mean of the Lambda density by quadrature over [0, upper], split
/// into panels so the adaptive rule sees the peak.
inline DensityMoments ncx2_moments(int antennas, double alpha, double amp, double eta, double noise_tilde) {
  const double center = alpha * alpha * amp * amp * eta * eta + noise_tilde;
  const double upper = center + 40.0 * noise_tilde + 10.0;
  const int panels = 400;
  DensityMoments m;
  for (int k = 0; k < panels; ++k) {
    const double a = upper * k / panels, b = upper * (k + 1) / panels;
    m.mass += integrate([&](double l) { return ncx2_pdf(l, antennas, alpha, amp, eta, noise_tilde); }, a, b, 1e-13);
    m.mean += integrate([&](double l) { return l * ncx2_pdf(l, antennas, alpha, amp, eta, noise_tilde); }, a, b,
                        1e-13);
  }
  return m;
}

struct ChannelStats {
  double power = 0.0;            // E|h_u[v]|^2
  double adjacent_corr = 0.0;    // |E h_u[v] h_u[v+1]^*| / E|h|^2
};

/// Empirical gain power and lag-one correlation over `realizations` channels.
inline ChannelStats channel_stats_mc(const ChannelConfig& cfg, std::size_t realizations, std::uint64_t seed) {
  Rng rng(seed);
  double power = 0.0;
  cplx corr{};
  std::size_t n = 0, m = 0;
  for (std::size_t r = 0; r < realizations; ++r) {
    const auto ch = gen_channel(cfg, rng);
    for (std::size_t u = 0; u < ch.gains.rows(); ++u) {
      for (std::size_t v = 0; v < ch.gains.cols(); ++v) {
        power += std::norm(ch.gains(u, v));
        ++n;
        if (v + 1 < ch.gains.cols()) {
          corr += ch.gains(u, v) * std::conj(ch.gains(u, v + 1));
          ++m;
        }
      }
    }
  }
  const double p = power / static_cast<double>(n);
  return {p, std::abs(corr / static_cast<double>(m)) / p};
}

}  // namespace dapsk::oracle
