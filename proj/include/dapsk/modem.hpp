// Two-ring differential APSK: Gray-coded PSK phase map, ring toggling encoder,
// and bit recovery from detected (amplitude ratio, phase) pairs.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dapsk/common.hpp"

namespace dapsk {

/// One block of N_b bits. Element 0 is the amplitude bit, the rest select the phase.
using BitBlock = std::vector<std::uint8_t>;

inline constexpr unsigned gray_encode(unsigned n) { return n ^ (n >> 1); }

inline constexpr unsigned gray_decode(unsigned g) {
  unsigned n = g;
  for (unsigned shift = g >> 1; shift != 0; shift >>= 1) n ^= shift;
  return n;
}

/// Ring geometry of the two-circle constellation.
///
/// The rings satisfy psi0^2 + psi1^2 = 2 (unit average power with equiprobable
/// rings) and psi1 = a * psi0.
class Constellation {
 public:
  explicit Constellation(int phases = 8, double ring_ratio = 2.0)
      : phases_(phases), ring_ratio_(ring_ratio) {
    require(phases >= 2 && std::has_single_bit(static_cast<unsigned>(phases)),
            "constellation: phases per ring must be a power of two >= 2");
    require(ring_ratio > 1.0 && std::isfinite(ring_ratio),
            "constellation: ring ratio must exceed 1");
    inner_ = std::sqrt(2.0 / (1.0 + ring_ratio * ring_ratio));
    outer_ = ring_ratio * inner_;
  }

  int phases() const noexcept { return phases_; }
  int phase_bits() const noexcept { return std::countr_zero(static_cast<unsigned>(phases_)); }
  int bits_per_symbol() const noexcept { return 1 + phase_bits(); }
  /// Total number of points over both rings (2M).
  int order() const noexcept { return 2 * phases_; }
  double ring_ratio() const noexcept { return ring_ratio_; }
  double inner() const noexcept { return inner_; }
  double outer() const noexcept { return outer_; }

 private:
  int phases_;
  double ring_ratio_;
  double inner_ = 0.0;
  double outer_ = 0.0;
};

/// Differential encoder state carried between channel uses.
struct EncoderState {
  double prev_amp = 0.0;  // |x[v-1]|, one of the ring amplitudes
  cplx prev_c{};          // accumulated phase-bearing symbol c[v-1]

  static EncoderState initial(const Constellation& spec) {
    return {spec.inner(), cplx{spec.inner(), 0.0}};
  }
};

/// Unit-modulus M-PSK point for log2(M) phase bits, MSB first, Gray-decoded.
inline cplx psk_map(std::span<const std::uint8_t> phase_bits, int phases) {
  require(phases >= 2 && std::has_single_bit(static_cast<unsigned>(phases)),
          "psk_map: M must be a power of two >= 2");
  const auto width = static_cast<std::size_t>(std::countr_zero(static_cast<unsigned>(phases)));
  require(phase_bits.size() == width, "psk_map: expected log2(M) phase bits");
  unsigned g = 0;
  for (auto b : phase_bits) {
    require(b <= 1, "psk_map: bits must be 0 or 1");
    g = (g << 1) | b;
  }
  const double angle = 2.0 * kPi * static_cast<double>(gray_decode(g)) / phases;
  return std::polar(1.0, angle);
}

/// Index of the M-PSK point nearest to the direction of s.
inline int nearest_phase_index(cplx s, int phases) {
  require(s != cplx{0.0, 0.0}, "phase detection: zero-valued symbol");
  const double step = 2.0 * kPi / phases;
  double angle = std::arg(s);
  if (angle < 0.0) angle += 2.0 * kPi;
  return static_cast<int>(std::lround(angle / step)) % phases;
}

inline BitBlock index_to_phase_bits(int index, int phases) {
  const int width = std::countr_zero(static_cast<unsigned>(phases));
  const unsigned g = gray_encode(static_cast<unsigned>(index));
  BitBlock bits(static_cast<std::size_t>(width));
  for (int k = 0; k < width; ++k) bits[static_cast<std::size_t>(k)] = (g >> (width - 1 - k)) & 1U;
  return bits;
}

/// Inverse of psk_map: Gray bits of the M-PSK point nearest to s/|s|.
inline BitBlock psk_unmap(cplx s, int phases) {
  require(phases >= 2 && std::has_single_bit(static_cast<unsigned>(phases)),
          "psk_unmap: M must be a power of two >= 2");
  require(std::isfinite(s.real()) && std::isfinite(s.imag()), "psk_unmap: non-finite symbol");
  return index_to_phase_bits(nearest_phase_index(s, phases), phases);
}

/// Encodes one bit block and advances the state.
inline cplx encode_symbol(std::span<const std::uint8_t> block, const Constellation& spec,
                          EncoderState& state) {
  require(block.size() == static_cast<std::size_t>(spec.bits_per_symbol()),
          "dapsk_encode: block must carry N_b bits");
  require(block[0] <= 1, "dapsk_encode: bits must be 0 or 1");
  const cplx s = psk_map(block.subspan(1), spec.phases());

  const bool on_inner = std::abs(state.prev_amp - spec.inner()) <
                        std::abs(state.prev_amp - spec.outer());
  double amp_factor = 1.0;
  if (block[0] == 1) amp_factor = on_inner ? spec.ring_ratio() : 1.0 / spec.ring_ratio();

  // c[v] stays on the ring of x[v-1]; the amplitude factor moves it between rings.
  const cplx c = state.prev_c * s;
  const cplx x = amp_factor * c;
  const double amp = (block[0] == 1) ? (on_inner ? spec.outer() : spec.inner())
                                     : (on_inner ? spec.inner() : spec.outer());
  // Renormalise to the exact ring to stop floating drift over long streams.
  const cplx x_exact = std::polar(amp, std::arg(x));
  state.prev_amp = amp;
  state.prev_c = x_exact;
  return x_exact;
}

struct EncodeResult {
  std::vector<cplx> symbols;
  EncoderState state;
};

inline EncodeResult dapsk_encode(std::span<const BitBlock> blocks, const Constellation& spec,
                                 EncoderState state) {
  EncodeResult out{{}, state};
  out.symbols.reserve(blocks.size());
  for (const auto& b : blocks) out.symbols.push_back(encode_symbol(b, spec, out.state));
  return out;
}

inline EncodeResult dapsk_encode(std::span<const BitBlock> blocks, const Constellation& spec) {
  return dapsk_encode(blocks, spec, EncoderState::initial(spec));
}

/// Concatenates the amplitude bit with the Gray bits of the detected phase.
inline BitBlock recover_bits(int amp_bit, cplx s_hat, int phases) {
  require(amp_bit == 0 || amp_bit == 1, "recover_bits: amplitude bit must be 0 or 1");
  require(s_hat != cplx{0.0, 0.0}, "recover_bits: zero phase estimate");
  BitBlock out{static_cast<std::uint8_t>(amp_bit)};
  const auto phase = psk_unmap(s_hat, phases);
  out.insert(out.end(), phase.begin(), phase.end());
  return out;
}

/// Genie recovery from the exact ratio x[v]/x[v-1] = a'[v] s[v].
inline BitBlock recover_from_ratio(cplx ratio, const Constellation& spec) {
  const double mag = std::abs(ratio);
  require(mag > 0.0, "recover_from_ratio: zero ratio");
  const int amp_bit = std::abs(mag - 1.0) < 1e-9 ? 0 : 1;
  return recover_bits(amp_bit, ratio / mag, spec.phases());
}

}  // namespace dapsk
