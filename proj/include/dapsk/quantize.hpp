// One-bit receivers: plain sign quantization, grouped variable-quantization-level
// (VQL) comparators, and Bussgang linearization constants.
#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "dapsk/channel.hpp"
#include "dapsk/common.hpp"
#include "dapsk/modem.hpp"

namespace dapsk {

/// Two-level comparator: values at or above `threshold` map to `high`.
struct QuantGroup {
  double threshold = 0.0;
  double low = -1.0;
  double high = 1.0;
  std::vector<int> antennas;
};

inline double sign_label(double y) { return y >= 0.0 ? 1.0 : -1.0; }

inline cplx sign_quantize(cplx y) { return {sign_label(y.real()), sign_label(y.imag())}; }

inline double quantize_component(double y, const QuantGroup& g) {
  return y >= g.threshold ? g.high : g.low;
}

inline cplx vql_quantize(cplx y, const QuantGroup& g) {
  return {quantize_component(y.real(), g), quantize_component(y.imag(), g)};
}

/// Comparator threshold of the outer VQL groups: psi0 (1 + a cos(pi/4)) / 2.
inline double vql_threshold(const Constellation& spec) {
  return spec.inner() * (1.0 + spec.ring_ratio() * std::cos(kPi / 4.0)) / 2.0;
}

/// Assignment of every antenna to exactly one comparator group.
class QuantizerSpec {
 public:
  QuantizerSpec(int antennas, std::vector<QuantGroup> groups)
      : group_of_(static_cast<std::size_t>(antennas), -1), groups_(std::move(groups)) {
    require(antennas >= 0, "quantizer: negative antenna count");
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      require(groups_[j].low < groups_[j].high, "quantizer: low label must be below high label");
      for (int u : groups_[j].antennas) {
        require(u >= 0 && u < antennas, "quantizer: antenna index out of range");
        require(group_of_[static_cast<std::size_t>(u)] < 0, "quantizer: antenna assigned twice");
        group_of_[static_cast<std::size_t>(u)] = static_cast<int>(j);
      }
    }
    for (int j : group_of_) require(j >= 0, "quantizer: groups must cover every antenna");
  }

  /// All antennas use the sign quantizer.
  static QuantizerSpec one_bit(int antennas) {
    QuantGroup g;
    for (int u = 0; u < antennas; ++u) g.antennas.push_back(u);
    return QuantizerSpec(antennas, {g});
  }

  /// Three contiguous groups: [psi0, psi1] labels above +zeta, sign, [-psi1, -psi0] around -zeta.
  static QuantizerSpec vql(int g1, int g2, int g3, const Constellation& spec) {
    require(g1 >= 0 && g2 >= 1 && g3 >= 0, "quantizer: VQL needs a non-empty sign group");
    const double zeta = vql_threshold(spec);
    std::vector<QuantGroup> groups{{zeta, spec.inner(), spec.outer(), {}},
                                   {0.0, -1.0, 1.0, {}},
                                   {-zeta, -spec.outer(), -spec.inner(), {}}};
    int u = 0;
    for (int k = 0; k < g1; ++k) groups[0].antennas.push_back(u++);
    for (int k = 0; k < g2; ++k) groups[1].antennas.push_back(u++);
    for (int k = 0; k < g3; ++k) groups[2].antennas.push_back(u++);
    return QuantizerSpec(u, std::move(groups));
  }

  int antennas() const noexcept { return static_cast<int>(group_of_.size()); }
  int group_of(int u) const { return group_of_.at(static_cast<std::size_t>(u)); }
  const std::vector<QuantGroup>& groups() const noexcept { return groups_; }
  const QuantGroup& group(std::size_t j) const { return groups_.at(j); }

 private:
  std::vector<int> group_of_;
  std::vector<QuantGroup> groups_;
};

/// Quantizes one channel use across the array (one sample per antenna).
inline std::vector<cplx> quantize_frame(std::span<const cplx> y, const QuantizerSpec& spec) {
  require(y.size() == static_cast<std::size_t>(spec.antennas()),
          "quantize_frame: sample count must equal antenna count");
  std::vector<cplx> q(y.size());
  for (std::size_t u = 0; u < y.size(); ++u) {
    q[u] = vql_quantize(y[u], spec.group(static_cast<std::size_t>(spec.group_of(static_cast<int>(u)))));
  }
  return q;
}

/// Bussgang model q = eta y + eps of the complex sign quantizer.
struct BussgangParams {
  double eta = 1.0;
  double sigma_eps2 = 0.0;  // complex variance of eps
};

/// Closed form for y ~ CN(0, sigma_y2): eta = 2 / sqrt(pi sigma_y2) and
/// sigma_eps2 = E|q|^2 - eta^2 sigma_y2 = 2 - 4/pi.
inline BussgangParams bussgang_params(double sigma_y2) {
  require(sigma_y2 > 0.0 && std::isfinite(sigma_y2), "bussgang_params: input power must be positive");
  const double eta = 2.0 / std::sqrt(kPi * sigma_y2);
  return {eta, 2.0 - eta * eta * sigma_y2};
}

/// Variance of the combined thermal + quantization term w[v].
inline double combined_noise_var(const BussgangParams& p, double rho_z, RingChange change,
                                 double ring_ratio) {
  require(rho_z >= 0.0 && p.sigma_eps2 >= 0.0, "combined_noise_var: variances must be >= 0");
  return p.eta * p.eta * rho_z + p.sigma_eps2 * (1.0 + amp_ratio_sq(change, ring_ratio));
}

}  // namespace dapsk
