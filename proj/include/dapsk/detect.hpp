// Differential detectors for one-bit and VQL arrays.
//
// The quantized model q_u[v] = a' s q_u[v-1] + w_u[v] is written per real
// component as q_{R,u,i} = a' f_{u,i}^T s_R + w, with f the rows of the real
// matrix of q_u[v-1]. Multiplying row i by the sign of the observed component
// folds the positive/negative cases into one product of normal CDFs.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "dapsk/channel.hpp"
#include "dapsk/common.hpp"
#include "dapsk/modem.hpp"
#include "dapsk/quantize.hpp"
#include "dapsk/special.hpp"

namespace dapsk {

using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

struct RealFrame {
  std::vector<Vec2> q;                      // [Re q_u[v], Im q_u[v]]
  std::vector<std::array<Vec2, 2>> ftilde;  // sign-adjusted rows per antenna

  std::size_t antennas() const noexcept { return q.size(); }
};

/// Builds the sign-adjusted previous-symbol rows for every antenna.
///
/// Rows of the real matrix of q_prev are [Re, -Im] and [Im, Re], so that
/// f_1^T s_R = Re(q_prev s) and f_2^T s_R = Im(q_prev s).
inline RealFrame realify(std::span<const cplx> q_now, std::span<const cplx> q_prev) {
  require(q_now.size() == q_prev.size(), "realify: current and previous frames differ in size");
  RealFrame f;
  f.q.reserve(q_now.size());
  f.ftilde.reserve(q_now.size());
  for (std::size_t u = 0; u < q_now.size(); ++u) {
    const cplx p = q_prev[u];
    const double s1 = sign_label(q_now[u].real());
    const double s2 = sign_label(q_now[u].imag());
    f.q.push_back({q_now[u].real(), q_now[u].imag()});
    f.ftilde.push_back({Vec2{s1 * p.real(), -s1 * p.imag()}, Vec2{s2 * p.imag(), s2 * p.real()}});
  }
  return f;
}

struct Candidate {
  double amp_ratio = 1.0;
  cplx phase{1.0, 0.0};

  Vec2 s_r() const { return {phase.real(), phase.imag()}; }
};

/// The 3M hypotheses {1, psi0/psi1, psi1/psi0} x M-PSK, amplitude-major order.
inline std::vector<Candidate> candidate_set(const Constellation& spec) {
  const std::array<double, 3> ratios{1.0, 1.0 / spec.ring_ratio(), spec.ring_ratio()};
  std::vector<Candidate> out;
  out.reserve(3 * static_cast<std::size_t>(spec.phases()));
  for (double a : ratios) {
    for (int m = 0; m < spec.phases(); ++m) {
      out.push_back({a, std::polar(1.0, 2.0 * kPi * m / spec.phases())});
    }
  }
  return out;
}

/// Effective SNR rho = 1 / var(w) for each amplitude hypothesis.
struct RhoTable {
  double same = 1.0;
  double up = 1.0;
  double down = 1.0;

  double for_ratio(double amp_ratio) const {
    switch (ring_change_for(amp_ratio)) {
      case RingChange::up: return up;
      case RingChange::down: return down;
      case RingChange::none: break;
    }
    return same;
  }
};

inline RhoTable make_rho_table(double noise_var, const BussgangParams& bg, double ring_ratio) {
  auto rho = [&](int b1, RingChange c) {
    return 1.0 / combined_noise_var(bg, diff_noise_var(b1, c, noise_var, ring_ratio), c, ring_ratio);
  };
  return {rho(0, RingChange::none), rho(1, RingChange::up), rho(1, RingChange::down)};
}

/// sum_{u,i} log Phi(a' sqrt(rho) f~_{u,i}^T s_R).
inline double onebit_loglik(const RealFrame& frame, const Candidate& cand, double rho) {
  require(rho > 0.0 && std::isfinite(rho), "onebit_loglik: rho must be positive and finite");
  require(std::isfinite(cand.amp_ratio) && std::isfinite(cand.phase.real()) &&
              std::isfinite(cand.phase.imag()),
          "onebit_loglik: non-finite candidate");
  const double scale = cand.amp_ratio * std::sqrt(rho);
  const Vec2 s = cand.s_r();
  double ll = 0.0;
  for (const auto& rows : frame.ftilde) {
    for (const auto& f : rows) {
      require(std::isfinite(f[0]) && std::isfinite(f[1]), "onebit_loglik: non-finite frame entry");
      ll += log_normal_cdf(scale * dot(f, s));
    }
  }
  return ll;
}

/// Distinct sign-adjusted rows with multiplicities. Sign-quantized frames
/// have at most four distinct rows, so likelihoods cost O(1) per candidate.
class RowHistogram {
 public:
  explicit RowHistogram(const RealFrame& frame) {
    for (const auto& rows : frame.ftilde) {
      for (const auto& f : rows) add(f);
    }
  }

  double loglik(const Candidate& cand, double rho) const {
    const double scale = cand.amp_ratio * std::sqrt(rho);
    const Vec2 s = cand.s_r();
    double ll = 0.0;
    for (const auto& [f, count] : rows_) ll += count * log_normal_cdf(scale * dot(f, s));
    return ll;
  }

 private:
  void add(const Vec2& f) {
    for (auto& [g, count] : rows_) {
      if (g == f) {
        ++count;
        return;
      }
    }
    rows_.emplace_back(f, 1);
  }

  std::vector<std::pair<Vec2, int>> rows_;
};

namespace detail {

// Strictly better by more than rounding noise; near-equal scores count as ties.
inline bool improves(double ll, double best) {
  if (best == -std::numeric_limits<double>::infinity()) return ll > best;
  return ll > best + 1e-12 * std::max(1.0, std::abs(best));
}

}  // namespace detail

struct JointDecision {
  Candidate candidate;
  std::size_t index = 0;
  int b1 = 0;
};

/// Exhaustive joint amplitude/phase ML over all 3M candidates; ties go to the lowest index.
inline JointDecision onebit_ml_detect(std::span<const cplx> q_now, std::span<const cplx> q_prev,
                                      const Constellation& spec, const RhoTable& rho) {
  const RowHistogram hist(realify(q_now, q_prev));
  const auto cands = candidate_set(spec);
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const double ll = hist.loglik(cands[k], rho.for_ratio(cands[k].amp_ratio));
    if (detail::improves(ll, best_ll)) {
      best_ll = ll;
      best = k;
    }
  }
  const Candidate& c = cands[best];
  const int b1 = std::abs(std::abs(c.amp_ratio * c.phase) - 1.0) < 1e-9 ? 0 : 1;
  return {c, best, b1};
}

struct PhaseDecision {
  cplx phase{1.0, 0.0};
  int index = 0;
};

/// Phase-only ML with a' = 1 over the sign-quantized antenna group.
inline PhaseDecision vql_phase_detect(const RealFrame& group_frame, const Constellation& spec,
                                      double rho) {
  require(group_frame.antennas() > 0, "vql_phase_detect: empty sign group");
  require(rho > 0.0 && std::isfinite(rho), "vql_phase_detect: rho must be positive and finite");
  const RowHistogram hist(group_frame);
  PhaseDecision best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < spec.phases(); ++m) {
    const Candidate c{1.0, std::polar(1.0, 2.0 * kPi * m / spec.phases())};
    const double ll = hist.loglik(c, rho);
    if (detail::improves(ll, best_ll)) {
      best_ll = ll;
      best = {c.phase, m};
    }
  }
  return best;
}

/// Per-component mean squared label over the whole array.
struct EnergyStat {
  Vec2 lambda{0.0, 0.0};
};

inline EnergyStat energy_statistic(std::span<const cplx> q) {
  require(!q.empty(), "energy_statistic: empty frame");
  EnergyStat e;
  for (const auto& x : q) {
    e.lambda[0] += x.real() * x.real();
    e.lambda[1] += x.imag() * x.imag();
  }
  e.lambda[0] /= static_cast<double>(q.size());
  e.lambda[1] /= static_cast<double>(q.size());
  return e;
}

/// Log density of Lambda when U Lambda / sigma~^2 is scaled non-central
/// chi-square with 2U degrees of freedom and mean component lambda0 = alpha^2 x~^2 eta^2.
inline double log_ncx2_pdf(double lambda, int antennas, double alpha, double amp, double eta,
                           double noise_tilde) {
  require(antennas >= 1, "ncx2_pdf: U must be >= 1");
  require(alpha > 0.0 && amp > 0.0 && eta > 0.0 && noise_tilde > 0.0,
          "ncx2_pdf: alpha, amplitude, eta and noise variance must be positive");
  require(lambda >= 0.0 && std::isfinite(lambda), "ncx2_pdf: Lambda must be finite and >= 0");
  const double U = antennas;
  const double lambda0 = alpha * alpha * amp * amp * eta * eta;
  const double c = U / noise_tilde;
  if (lambda == 0.0) {
    return antennas == 1 ? std::log(c) - c * lambda0 : -std::numeric_limits<double>::infinity();
  }
  return std::log(c) + 0.5 * (U - 1.0) * std::log(lambda / lambda0) - c * (lambda + lambda0) +
         log_bessel_i(U - 1.0, 2.0 * c * std::sqrt(lambda * lambda0));
}

inline double ncx2_pdf(double lambda, int antennas, double alpha, double amp, double eta,
                       double noise_tilde) {
  return std::exp(log_ncx2_pdf(lambda, antennas, alpha, amp, eta, noise_tilde));
}

/// Parameters of the analytic energy model Lambda_i = x~^2 eta^2 alpha^2 + sigma~^2.
struct AmplitudeModel {
  int antennas = 1;
  double alpha = 1.0;
  double eta = 1.0;
  double noise_tilde = 1.0;  // eta^2 sigma_z^2 + sigma_eps^2
  double inner = 1.0;
  double outer = 1.0;

  static AmplitudeModel make(const Constellation& spec, int antennas, double noise_var,
                             const BussgangParams& bg, double alpha = 1.0) {
    return {antennas, alpha, bg.eta, bg.eta * bg.eta * noise_var + bg.sigma_eps2, spec.inner(),
            spec.outer()};
  }
};

enum class Hypothesis { H0, H1 };

/// Likelihood-ratio test between "same ring" and "ring change", each subcase
/// equally likely, components treated as independent.
inline Hypothesis lrt_amplitude_test(const EnergyStat& now, const EnergyStat& prev,
                                     const AmplitudeModel& m) {
  auto log_omega = [&](const EnergyStat& e, double amp) {
    double s = 0.0;
    for (double l : e.lambda) s += log_ncx2_pdf(l, m.antennas, m.alpha, amp, m.eta, m.noise_tilde);
    return s;
  };
  const double now_in = log_omega(now, m.inner);
  const double now_out = log_omega(now, m.outer);
  const double prev_in = log_omega(prev, m.inner);
  const double prev_out = log_omega(prev, m.outer);
  const double h0 = detail::log_add(prev_in + now_in, prev_out + now_out);
  const double h1 = detail::log_add(prev_in + now_out, prev_out + now_in);
  return h1 > h0 ? Hypothesis::H1 : Hypothesis::H0;
}

}  // namespace dapsk
