// Pilot-based coherent one-bit receiver used as the comparison system.
//
// This is a representative pilot-LMMSE + one-bit ML chain, not a reproduction
// of any specific published coherent detector.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "dapsk/channel.hpp"
#include "dapsk/common.hpp"
#include "dapsk/detect.hpp"
#include "dapsk/modem.hpp"
#include "dapsk/quantize.hpp"
#include "dapsk/special.hpp"

namespace dapsk {

/// ceil(xi N) pilots spread evenly over the block (comb layout), at uses
/// floor(k N / P). Spreading them keeps the delay-tap estimate well conditioned
/// for every data use.
class PilotPlan {
 public:
  PilotPlan(double xi, int uses) : xi_(xi), uses_(uses) {
    require(xi > 0.0 && xi < 1.0, "pilot plan: fraction must lie in (0, 1)");
    require(uses >= 2, "pilot plan: need at least two channel uses");
    pilots_ = static_cast<int>(std::ceil(xi * uses - 1e-9));
    require(pilots_ >= 1 && pilots_ < uses, "pilot plan: need at least one pilot and one data use");
    std::vector<bool> is_pilot(static_cast<std::size_t>(uses), false);
    for (int k = 0; k < pilots_; ++k) {
      const auto v = static_cast<int>(static_cast<long long>(k) * uses / pilots_);
      pilot_uses_.push_back(v);
      is_pilot[static_cast<std::size_t>(v)] = true;
    }
    for (int v = 0; v < uses; ++v) {
      if (!is_pilot[static_cast<std::size_t>(v)]) data_uses_.push_back(v);
    }
    // Unit-modulus chirp exp(j pi k^2 / P).
    symbols_.reserve(static_cast<std::size_t>(pilots_));
    for (int k = 0; k < pilots_; ++k) {
      symbols_.push_back(std::polar(1.0, kPi * static_cast<double>(k) * k / pilots_));
    }
  }

  double fraction() const noexcept { return xi_; }
  int uses() const noexcept { return uses_; }
  int pilots() const noexcept { return pilots_; }
  int data_uses() const noexcept { return uses_ - pilots_; }
  double data_fraction() const noexcept { return static_cast<double>(data_uses()) / uses_; }
  const std::vector<cplx>& symbols() const noexcept { return symbols_; }
  const std::vector<int>& pilot_positions() const noexcept { return pilot_uses_; }
  const std::vector<int>& data_positions() const noexcept { return data_uses_; }

 private:
  double xi_;
  int uses_;
  int pilots_ = 0;
  std::vector<int> pilot_uses_;
  std::vector<int> data_uses_;
  std::vector<cplx> symbols_;
};

namespace detail {

// In-place Cholesky of a Hermitian positive definite matrix (lower factor).
inline void cholesky(Matrix<cplx>& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k) d -= std::norm(a(j, k));
    require(d > 0.0, "cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * std::conj(a(j, k));
      a(i, j) = s / ljj;
    }
  }
}

inline void cholesky_solve(const Matrix<cplx>& l, std::span<cplx> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    cplx s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i).real();
  }
  for (std::size_t i = n; i-- > 0;) {
    cplx s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= std::conj(l(k, i)) * b[k];
    b[i] = s / l(i, i).real();
  }
}

}  // namespace detail

namespace detail {

/// Pilot regression matrix A (P x L, y_pilots = A g + z) and the Cholesky
/// factor of the pilot observation covariance C_qq.
struct PilotSystem {
  Matrix<cplx> a;
  Matrix<cplx> cqq;
};

/// C_qq = eta^2 C_yy + C_ee. The distortion covariance C_ee follows the
/// arcsine law of a sign quantizer, (4/pi)(arcsin R - R) with R the
/// normalized C_yy, scaled so its diagonal is sigma_eps^2. For one-bit
/// observations this is exactly (4/pi) arcsin R; with eta = 1 and
/// sigma_eps^2 = 0 it is the unquantized C_yy.
inline PilotSystem pilot_system(const PilotPlan& plan, std::span<const double> pdp, const BussgangParams& bg,
                                double noise_var) {
  const auto P = static_cast<std::size_t>(plan.pilots());
  const auto L = pdp.size();
  const auto N = static_cast<std::size_t>(plan.uses());
  const auto w = twiddles(plan.uses());
  PilotSystem sys{Matrix<cplx>(P, L), Matrix<cplx>(P, P)};
  for (std::size_t k = 0; k < P; ++k) {
    const auto v = static_cast<std::size_t>(plan.pilot_positions()[k]);
    for (std::size_t l = 0; l < L; ++l) sys.a(k, l) = plan.symbols()[k] * std::sqrt(pdp[l]) * w[(l * v) % N];
  }
  const double scale = bg.sigma_eps2 / (2.0 - 4.0 / kPi);
  auto asin_clamped = [](double x) { return std::asin(std::clamp(x, -1.0, 1.0)); };
  std::vector<double> var(P);
  for (std::size_t k = 0; k < P; ++k) {
    double d = noise_var;
    for (std::size_t l = 0; l < L; ++l) d += std::norm(sys.a(k, l));
    var[k] = d;
  }
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cplx c{};
      for (std::size_t l = 0; l < L; ++l) c += sys.a(i, l) * std::conj(sys.a(j, l));
      if (i == j) c += noise_var;
      const cplx r = c / std::sqrt(var[i] * var[j]);
      const cplx dist = i == j ? cplx{2.0 - 4.0 / kPi, 0.0}
                               : 4.0 / kPi * (cplx{asin_clamped(r.real()), asin_clamped(r.imag())} - r);
      sys.cqq(i, j) = bg.eta * bg.eta * c + scale * dist;
      sys.cqq(j, i) = std::conj(sys.cqq(i, j));
    }
  }
  // Jitter keeps the noiseless unquantized limit factorizable.
  double trace = 0.0;
  for (std::size_t k = 0; k < P; ++k) trace += sys.cqq(k, k).real();
  for (std::size_t k = 0; k < P; ++k) sys.cqq(k, k) += 1e-10 * trace / static_cast<double>(P);
  cholesky(sys.cqq);
  return sys;
}

}  // namespace detail

/// LMMSE estimate of every per-use gain h_u[v] from quantized pilots.
///
/// Bussgang model q = eta y + e with y = A g + z over the L delay taps (prior
/// CN(0, 1)): g_hat = eta A^H C_qq^-1 q, then mapped to all N uses. With
/// eta = 1, sigma_eps^2 = 0 and L = 1 this is h = sum_k y[k] p*[k] / (P + sigma_z^2).
///
/// `q_pilots` is U x P in pilot order. Returns U x N.
inline Matrix<cplx> estimate_channel(const Matrix<cplx>& q_pilots, const PilotPlan& plan,
                                     std::span<const double> pdp, const BussgangParams& bg,
                                     double noise_var) {
  require(plan.pilots() >= 1, "estimate_channel: no pilots");
  require(q_pilots.cols() == static_cast<std::size_t>(plan.pilots()),
          "estimate_channel: pilot observation count must match the plan");
  require(!pdp.empty(), "estimate_channel: empty PDP");
  const auto U = q_pilots.rows();
  const auto P = static_cast<std::size_t>(plan.pilots());
  const auto L = pdp.size();
  const auto N = static_cast<std::size_t>(plan.uses());
  const auto w = twiddles(plan.uses());
  const auto sys = detail::pilot_system(plan, pdp, bg, noise_var);

  Matrix<cplx> h(U, N);
  std::vector<cplx> s(P), g(L);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t k = 0; k < P; ++k) s[k] = q_pilots(u, k);
    detail::cholesky_solve(sys.cqq, s);
    for (std::size_t l = 0; l < L; ++l) {
      cplx acc{};
      for (std::size_t k = 0; k < P; ++k) acc += std::conj(sys.a(k, l)) * s[k];
      g[l] = bg.eta * acc;
    }
    for (std::size_t v = 0; v < N; ++v) {
      cplx acc{};
      for (std::size_t l = 0; l < L; ++l) acc += std::sqrt(pdp[l]) * g[l] * w[(l * v) % N];
      h(u, v) = acc;
    }
  }
  return h;
}

/// Block-averaged variance of h_u[v] - h_hat_u[v]: sum_l p[l] C[l][l] with
/// tap error covariance C = I - eta^2 A^H C_qq^-1 A.
inline double estimate_error_var(const PilotPlan& plan, std::span<const double> pdp, const BussgangParams& bg,
                                 double noise_var) {
  require(!pdp.empty(), "estimate_error_var: empty PDP");
  const auto sys = detail::pilot_system(plan, pdp, bg, noise_var);
  const auto P = static_cast<std::size_t>(plan.pilots());
  double total = 0.0;
  std::vector<cplx> col(P);
  for (std::size_t l = 0; l < pdp.size(); ++l) {
    for (std::size_t k = 0; k < P; ++k) col[k] = sys.a(k, l);
    detail::cholesky_solve(sys.cqq, col);
    cplx quad{};
    for (std::size_t k = 0; k < P; ++k) quad += std::conj(sys.a(k, l)) * col[k];
    total += pdp[l] * std::max(0.0, 1.0 - bg.eta * bg.eta * quad.real());
  }
  return total;
}

/// Points and bit labels of the coherent alphabet. Bit 0 of each label is
/// reported as the "amplitude" bit in error tallies.
struct CoherentAlphabet {
  std::vector<cplx> points;
  std::vector<BitBlock> labels;

  int bits_per_symbol() const { return static_cast<int>(labels.front().size()); }

  /// Unit-modulus Gray-coded PSK of the given order.
  static CoherentAlphabet psk(int order) {
    CoherentAlphabet a;
    for (int m = 0; m < order; ++m) {
      a.points.push_back(std::polar(1.0, 2.0 * kPi * m / order));
      a.labels.push_back(index_to_phase_bits(m, order));
    }
    return a;
  }

  /// The 2M-point two-ring set with absolute ring bit first.
  static CoherentAlphabet apsk(const Constellation& spec) {
    CoherentAlphabet a;
    for (int r = 0; r < 2; ++r) {
      const double amp = r == 0 ? spec.inner() : spec.outer();
      for (int m = 0; m < spec.phases(); ++m) {
        a.points.push_back(std::polar(amp, 2.0 * kPi * m / spec.phases()));
        BitBlock bits{static_cast<std::uint8_t>(r)};
        const auto phase = index_to_phase_bits(m, spec.phases());
        bits.insert(bits.end(), phase.begin(), phase.end());
        a.labels.push_back(std::move(bits));
      }
    }
    return a;
  }
};

/// ML symbol decision from one quantized use given channel estimates:
/// argmax_k sum_{u,i} log Phi(sqrt(rho[k]) sign(q_{R,u,i}) [Re, Im](h_u x_k)_i).
inline std::size_t coherent_detect(std::span<const cplx> q, std::span<const cplx> h_hat,
                                   std::span<const cplx> points, std::span<const double> rho) {
  require(q.size() == h_hat.size(), "coherent_detect: frame and estimate sizes differ");
  require(!points.empty(), "coherent_detect: empty alphabet");
  require(rho.size() == points.size(), "coherent_detect: need one rho per point");
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points.size(); ++k) {
    require(rho[k] > 0.0 && std::isfinite(rho[k]), "coherent_detect: rho must be positive");
    const double sr = std::sqrt(rho[k]);
    double ll = 0.0;
    for (std::size_t u = 0; u < q.size(); ++u) {
      const cplx m = h_hat[u] * points[k];
      ll += log_normal_cdf(sr * sign_label(q[u].real()) * m.real());
      ll += log_normal_cdf(sr * sign_label(q[u].imag()) * m.imag());
    }
    if (detail::improves(ll, best_ll)) {
      best_ll = ll;
      best = k;
    }
  }
  return best;
}

inline std::size_t coherent_detect(std::span<const cplx> q, std::span<const cplx> h_hat,
                                   std::span<const cplx> points, double rho) {
  const std::vector<double> r(points.size(), rho);
  return coherent_detect(q, h_hat, points, r);
}

/// Per-point rho for h = h_hat + e, e ~ CN(0, err_var): each real component of
/// h x + z has variance (err_var |x|^2 + sigma_z^2) / 2 around h_hat x.
inline std::vector<double> coherent_rho(std::span<const cplx> points, double err_var, double noise_var) {
  require(err_var >= 0.0 && noise_var >= 0.0 && err_var + noise_var > 0.0,
          "coherent_rho: variances must be >= 0 and not both zero");
  std::vector<double> r;
  r.reserve(points.size());
  for (const auto& x : points) r.push_back(2.0 / (err_var * std::norm(x) + noise_var));
  return r;
}

}  // namespace dapsk
