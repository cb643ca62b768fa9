#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "fuzzvault/bch.hpp"

using fuzzvault::BchCode;
using fuzzvault::BitVector;
using fuzzvault::Rng;

namespace {

BitVector word_from_int(std::uint32_t v, std::size_t n) {
  BitVector w(n);
  for (std::size_t i = 0; i < n; ++i) w.set(i, (v >> i) & 1U);
  return w;
}

// k = n - (number of exponents in the union of cyclotomic cosets of 1..2t),
// counted with plain modular arithmetic.
std::size_t reference_dimension(int m, std::size_t t) {
  const std::uint32_t n = (1U << m) - 1;
  std::set<std::uint32_t> roots;
  for (std::uint32_t s = 1; s <= 2 * t; ++s) {
    std::uint32_t e = s % n;
    do {
      roots.insert(e);
      e = (2 * e) % n;
    } while (e != s % n);
  }
  return n - roots.size();
}

void flip_random(BitVector& w, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(w.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < count; ++i) w.flip(idx[i]);
}

}  // namespace

TEST(Bch, Generator15_7) {
  const BchCode code(4, 2);
  EXPECT_EQ(code.n(), 15U);
  EXPECT_EQ(code.k(), 7U);
  // g(x) = x^8 + x^7 + x^6 + x^4 + 1
  EXPECT_EQ(code.generator(), word_from_int(0b111010001, 9));
  EXPECT_EQ(code.id(), "bch:m=4:t=2");
}

TEST(Bch, GeneratorHasDesignedRoots) {
  for (std::size_t t : {1U, 2U, 3U}) {
    const BchCode code(4, t);
    const auto& f = code.field();
    for (std::uint32_t j = 1; j <= 2 * t; ++j) {
      fuzzvault::GfElement acc = 0;
      for (std::size_t i = 0; i < code.generator().size(); ++i) {
        if (code.generator().get(i)) acc ^= f.alpha_pow(static_cast<long long>(i * j));
      }
      EXPECT_EQ(acc, 0U) << "t = " << t << " j = " << j;
    }
  }
}

TEST(Bch, DimensionMatchesCosetCount) {
  for (int m : {4, 5, 6, 7, 8}) {
    const std::size_t n = (1U << m) - 1;
    for (std::size_t t = 1; 2 * t < n; ++t) {
      const std::size_t k = reference_dimension(m, t);
      if (k == 0) {
        EXPECT_THROW(BchCode(m, t), std::invalid_argument);
        break;
      }
      EXPECT_EQ(BchCode(m, t).k(), k) << "m = " << m << " t = " << t;
    }
  }
  // Familiar rows of the length-127 table.
  EXPECT_EQ(BchCode(7, 1).k(), 120U);
  EXPECT_EQ(BchCode(7, 10).k(), 64U);
  EXPECT_EQ(BchCode(7, 15).k(), 36U);
  EXPECT_EQ(BchCode(7, 31).k(), 8U);
  EXPECT_EQ(BchCode(7, 45).k(), 1U);
}

TEST(Bch, RejectsDegenerateParameters) {
  EXPECT_THROW(BchCode(7, 0), std::invalid_argument);
  EXPECT_THROW(BchCode(7, 64), std::invalid_argument);
}

TEST(Bch, SystematicEncodingAndLinearity) {
  const BchCode code(7, 10);
  Rng rng(7);
  std::bernoulli_distribution bit(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    BitVector a(code.k()), b(code.k());
    for (std::size_t i = 0; i < code.k(); ++i) {
      a.set(i, bit(rng));
      b.set(i, bit(rng));
    }
    const BitVector ca = code.encode(a);
    const BitVector cb = code.encode(b);
    EXPECT_TRUE(code.is_codeword(ca));
    EXPECT_EQ(code.message(ca), a);
    for (std::size_t i = 0; i < code.k(); ++i) EXPECT_EQ(ca.get(code.n() - code.k() + i), a.get(i));
    EXPECT_EQ(code.encode(a ^ b), ca ^ cb);
  }
  EXPECT_THROW(code.encode(BitVector(code.k() + 1)), std::invalid_argument);
}

TEST(Bch, MinimumDistanceOf15_7IsFive) {
  const BchCode code(4, 2);
  std::size_t dmin = code.n();
  for (std::uint32_t m = 1; m < (1U << code.k()); ++m) {
    dmin = std::min(dmin, code.encode(word_from_int(m, code.k())).popcount());
  }
  EXPECT_EQ(dmin, 5U);
}

// Every one of the 2^15 words against brute-force nearest-codeword search.
TEST(Bch, DecodeMatchesExhaustiveSearch15_7) {
  const BchCode code(4, 2);
  std::vector<BitVector> codewords;
  for (std::uint32_t m = 0; m < (1U << code.k()); ++m) codewords.push_back(code.encode(word_from_int(m, code.k())));
  std::size_t within = 0;
  for (std::uint32_t v = 0; v < (1U << code.n()); ++v) {
    const BitVector r = word_from_int(v, code.n());
    std::optional<BitVector> near;
    for (const auto& c : codewords) {
      if (fuzzvault::hamming(c, r) <= code.t()) near = c;
    }
    const auto decoded = code.decode(r);
    ASSERT_EQ(decoded.has_value(), near.has_value()) << "word " << v;
    if (near) {
      ASSERT_EQ(*decoded, *near) << "word " << v;
      ++within;
    }
  }
  // 128 codewords times the radius-2 ball 1 + 15 + 105.
  EXPECT_EQ(within, 128U * 121U);
}

TEST(Bch, CorrectsUpToTErrorsAtLength127) {
  Rng rng(11);
  for (std::size_t t : {1U, 5U, 10U, 15U, 21U}) {
    const BchCode code(7, t);
    for (int trial = 0; trial < 40; ++trial) {
      const BitVector c = code.random_codeword(rng);
      BitVector r = c;
      flip_random(r, static_cast<std::size_t>(trial) % (t + 1), rng);
      const auto d = code.decode(r);
      ASSERT_TRUE(d.has_value()) << "t = " << t;
      EXPECT_EQ(*d, c);
    }
  }
}

TEST(Bch, BeyondCapacityNeverReturnsAFarWord) {
  Rng rng(13);
  const BchCode code(7, 10);
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const BitVector c = code.random_codeword(rng);
    BitVector r = c;
    flip_random(r, 11 + static_cast<std::size_t>(trial % 20), rng);
    const auto d = code.decode(r);
    if (!d) {
      ++failures;
      continue;
    }
    EXPECT_TRUE(code.is_codeword(*d));
    EXPECT_LE(fuzzvault::hamming(*d, r), code.t());
    EXPECT_NE(*d, c);
  }
  EXPECT_GT(failures, 150);
}

TEST(Bch, RepetitionCodeAtLargeRadius) {
  const BchCode code(7, 45);
  ASSERT_EQ(code.k(), 1U);
  Rng rng(3);
  BitVector ones = ~BitVector(127);
  EXPECT_TRUE(code.is_codeword(ones));
  BitVector r = ones;
  flip_random(r, 45, rng);
  EXPECT_EQ(code.decode(r), ones);
  BitVector zero(127);
  flip_random(zero, 45, rng);
  EXPECT_EQ(code.decode(zero), BitVector(127));
  // Decoding is bounded by the designed radius, not by half the true distance.
  BitVector sixty(127);
  flip_random(sixty, 60, rng);
  EXPECT_FALSE(code.decode(sixty).has_value());
  // 63 ones sits at distance 63 from zero and 64 from ones: beyond radius 45.
  BitVector mid(127);
  flip_random(mid, 63, rng);
  EXPECT_FALSE(code.decode(mid).has_value());
}

TEST(Bch, SyndromesVanishOnCodewordsOnly) {
  const BchCode code(7, 5);
  Rng rng(5);
  const BitVector c = code.random_codeword(rng);
  for (auto s : code.syndromes(c)) EXPECT_EQ(s, 0U);
  BitVector e(127);
  e.set(17, true);
  const auto s = code.syndromes(c ^ e);
  EXPECT_EQ(s[0], code.field().alpha_pow(17));
  EXPECT_FALSE(code.is_codeword(e));
  EXPECT_THROW(code.decode(BitVector(126)), std::invalid_argument);
}

TEST(Bch, CyclotomicCosetsAndMinimalPolynomials) {
  const auto f = fuzzvault::Field::standard(4);
  EXPECT_EQ(fuzzvault::cyclotomic_coset(1, f), (std::vector<std::uint32_t>{1, 2, 4, 8}));
  EXPECT_EQ(fuzzvault::cyclotomic_coset(5, f), (std::vector<std::uint32_t>{5, 10}));
  EXPECT_EQ(fuzzvault::minimal_polynomial(1, f), word_from_int(0x13, 5));
  EXPECT_EQ(fuzzvault::minimal_polynomial(5, f), word_from_int(0x7, 3));
  EXPECT_EQ(fuzzvault::minimal_polynomial(3, f), word_from_int(0x1F, 5));
}

TEST(BerlekampMassey, FindsShortestRecurrence) {
  const auto f = fuzzvault::Field::standard(4);
  // Single error at position 3: S_j = alpha^{3j}, locator 1 + alpha^3 x.
  std::vector<fuzzvault::GfElement> s;
  for (int j = 1; j <= 4; ++j) s.push_back(f.alpha_pow(3 * j));
  const auto lambda = fuzzvault::berlekamp_massey(f, s);
  ASSERT_GE(lambda.size(), 2U);
  EXPECT_EQ(lambda[0], 1U);
  EXPECT_EQ(lambda[1], f.alpha_pow(3));
  for (std::size_t i = 2; i < lambda.size(); ++i) EXPECT_EQ(lambda[i], 0U);
  const auto pos = fuzzvault::locate_errors(f, s, 2, 15);
  ASSERT_TRUE(pos.has_value());
  EXPECT_EQ(*pos, (std::vector<std::uint32_t>{3}));
}
