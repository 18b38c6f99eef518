#include <catch_amalgamated.hpp>

#include <bit>
#include <cmath>
#include <random>

#include "dapsk/modem.hpp"

using namespace dapsk;
using Catch::Approx;

namespace {

std::vector<BitBlock> random_blocks(std::size_t n, int nb, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<BitBlock> out(n, BitBlock(static_cast<std::size_t>(nb)));
  for (auto& b : out) {
    for (auto& x : b) x = coin(rng) ? 1 : 0;
  }
  return out;
}

}  // namespace

TEST_CASE("constellation ring amplitudes") {
  const Constellation c(8, 2.0);
  CHECK(c.inner() == Approx(0.6324555320336759).epsilon(1e-14));
  CHECK(c.outer() == Approx(1.2649110640673518).epsilon(1e-14));
  CHECK(c.inner() * c.inner() + c.outer() * c.outer() == Approx(2.0).epsilon(1e-15));
  CHECK(c.bits_per_symbol() == 4);
  CHECK(c.order() == 16);
  CHECK_THROWS_AS(Constellation(6, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(Constellation(8, 1.0), std::invalid_argument);
}

TEST_CASE("gray code is a bijection with unit Hamming steps") {
  for (unsigned n = 0; n < 64; ++n) {
    CHECK(gray_decode(gray_encode(n)) == n);
    CHECK(std::popcount(gray_encode(n) ^ gray_encode((n + 1) % 64)) == 1);
  }
}

TEST_CASE("psk_map examples and errors") {
  const BitBlock zero{0, 0, 0};
  const cplx s = psk_map(zero, 8);
  CHECK(s.real() == Approx(1.0));
  CHECK(std::abs(s.imag()) < 1e-15);
  // Gray 001 decodes to index 1.
  const BitBlock one{0, 0, 1};
  CHECK(std::arg(psk_map(one, 8)) == Approx(kPi / 4));
  // Gray 011 decodes to index 2.
  const BitBlock two{0, 1, 1};
  CHECK(std::arg(psk_map(two, 8)) == Approx(kPi / 2));
  const BitBlock short_block{0, 1};
  CHECK_THROWS_AS(psk_map(short_block, 8), std::invalid_argument);
}

TEST_CASE("psk_unmap inverts psk_map for every label") {
  for (int M : {2, 4, 8, 16, 32}) {
    for (int m = 0; m < M; ++m) {
      const auto bits = index_to_phase_bits(m, M);
      const cplx s = psk_map(bits, M);
      CHECK(std::abs(std::abs(s) - 1.0) < 1e-12);
      CHECK(psk_unmap(s, M) == bits);
      // Tolerates scaling within [0.5, 2] and a small rotation.
      CHECK(psk_unmap(1.7 * s * std::polar(1.0, 0.3 * kPi / M), M) == bits);
    }
  }
  CHECK(psk_unmap({1.0, 0.0}, 8) == BitBlock{0, 0, 0});
  CHECK_THROWS_AS(psk_unmap({0.0, 0.0}, 8), std::invalid_argument);
}

TEST_CASE("dapsk_encode follows the four-case ring rule") {
  const Constellation c(8, 2.0);
  SECTION("b1 = 0 on the inner ring keeps the ring") {
    EncoderState st = EncoderState::initial(c);
    const BitBlock b{0, 0, 0, 0};
    const cplx x = encode_symbol(b, c, st);
    CHECK(std::abs(x) == Approx(c.inner()));
  }
  SECTION("b1 = 1 toggles inner to outer and back") {
    EncoderState st = EncoderState::initial(c);
    const BitBlock b{1, 0, 0, 0};
    CHECK(std::abs(encode_symbol(b, c, st)) == Approx(c.outer()));
    CHECK(std::abs(encode_symbol(b, c, st)) == Approx(c.inner()));
  }
  SECTION("empty input returns the initial state") {
    const auto r = dapsk_encode(std::vector<BitBlock>{}, c);
    CHECK(r.symbols.empty());
    CHECK(r.state.prev_amp == c.inner());
    CHECK(r.state.prev_c == cplx{c.inner(), 0.0});
  }
  SECTION("wrong block length is rejected") {
    EncoderState st = EncoderState::initial(c);
    const BitBlock b{1, 0, 0};
    CHECK_THROWS_AS(encode_symbol(b, c, st), std::invalid_argument);
  }
}

TEST_CASE("encoder invariants over a long random stream") {
  const Constellation c(8, 2.0);
  Rng rng(11);
  const auto blocks = random_blocks(100000, c.bits_per_symbol(), rng);
  const auto r = dapsk_encode(blocks, c);
  double power = 0.0;
  cplx prev{c.inner(), 0.0};
  for (std::size_t v = 0; v < r.symbols.size(); ++v) {
    const cplx x = r.symbols[v];
    const double amp = std::abs(x);
    REQUIRE((std::abs(amp - c.inner()) < 1e-12 || std::abs(amp - c.outer()) < 1e-12));
    power += amp * amp;
    // x[v]/x[v-1] = a' s with a' from the ring rule and s from the phase bits.
    const auto& b = blocks[v];
    const cplx s = psk_map(std::span<const std::uint8_t>(b).subspan(1), c.phases());
    const bool was_inner = std::abs(std::abs(prev) - c.inner()) < 1e-9;
    const double a = b[0] == 0 ? 1.0 : (was_inner ? c.ring_ratio() : 1.0 / c.ring_ratio());
    REQUIRE(std::abs(x / prev - a * s) < 1e-9 * std::abs(a));
    REQUIRE(recover_from_ratio(x / prev, c) == b);
    prev = x;
  }
  CHECK(power / static_cast<double>(r.symbols.size()) == Approx(1.0).margin(0.01));
}

TEST_CASE("encoding can resume from a saved state") {
  const Constellation c(16, 2.5);
  Rng rng(3);
  const auto blocks = random_blocks(40, c.bits_per_symbol(), rng);
  const auto whole = dapsk_encode(blocks, c);
  const std::span<const BitBlock> all(blocks);
  const auto first = dapsk_encode(all.first(17), c);
  const auto second = dapsk_encode(all.subspan(17), c, first.state);
  for (std::size_t v = 0; v < 17; ++v) CHECK(first.symbols[v] == whole.symbols[v]);
  for (std::size_t v = 17; v < 40; ++v) CHECK(second.symbols[v - 17] == whole.symbols[v]);
}

TEST_CASE("recover_bits") {
  CHECK(recover_bits(0, {1.0, 0.0}, 8) == BitBlock{0, 0, 0, 0});
  CHECK(recover_bits(1, std::polar(1.0, kPi / 4), 8) == BitBlock{1, 0, 0, 1});
  CHECK_THROWS_AS(recover_bits(0, {0.0, 0.0}, 8), std::invalid_argument);
  CHECK_THROWS_AS(recover_bits(2, {1.0, 0.0}, 8), std::invalid_argument);
}
