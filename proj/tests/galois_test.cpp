#include <gtest/gtest.h>

#include <stdexcept>
#include <vector>

#include "fuzzvault/galois.hpp"

using fuzzvault::Field;
using fuzzvault::GfElement;

namespace {

// Reference arithmetic: shift-and-add multiplication reduced by `poly`.
GfElement clmul_mod(GfElement a, GfElement b, std::uint32_t poly, int m) {
  GfElement r = 0;
  while (b != 0) {
    if (b & 1U) r ^= a;
    b >>= 1;
    a <<= 1;
    if (a & (1U << m)) a ^= poly;
  }
  return r;
}

// Remainder of polynomial division over GF(2).
std::uint32_t gf2_mod(std::uint32_t a, std::uint32_t b) {
  const int db = 31 - __builtin_clz(b);
  while (a != 0 && 31 - __builtin_clz(a) >= db) a ^= b << ((31 - __builtin_clz(a)) - db);
  return a;
}

bool has_factor_of_degree_at_most(std::uint32_t poly, int max_degree) {
  for (std::uint32_t f = 2; f < (1U << (max_degree + 1)); ++f) {
    if (gf2_mod(poly, f) == 0) return true;
  }
  return false;
}

}  // namespace

TEST(Field, QuarticPrimitivePolynomialGeneratesGroupOfOrder15) {
  const Field f(4, 0x13);
  EXPECT_EQ(f.order(), 15U);
  EXPECT_EQ(f.size(), 16U);
  // Order of x computed with the reference multiplier.
  GfElement x = 2;
  int order = 1;
  while (x != 1) {
    x = clmul_mod(x, 2, 0x13, 4);
    ++order;
  }
  EXPECT_EQ(order, 15);
}

TEST(Field, RejectsReduciblePolynomial) {
  // x^4 + x^2 + 1 = (x^2 + x + 1)^2.
  ASSERT_TRUE(has_factor_of_degree_at_most(0x15, 2));
  EXPECT_EQ(clmul_mod(0x7, 0x7, 0x100, 8), 0x15U);
  EXPECT_THROW(Field(4, 0x15), std::invalid_argument);
}

TEST(Field, RejectsIrreducibleButNonPrimitivePolynomial) {
  // x^4 + x^3 + x^2 + x + 1 is irreducible but x has order 5.
  ASSERT_FALSE(has_factor_of_degree_at_most(0x1F, 2));
  EXPECT_THROW(Field(4, 0x1F), std::invalid_argument);
}

TEST(Field, RejectsWrongDegreeAndRange) {
  EXPECT_THROW(Field(4, 0x25), std::invalid_argument);
  EXPECT_THROW(Field(2, 0x7), std::invalid_argument);
  EXPECT_THROW(Field(17, 0x20009), std::invalid_argument);
}

TEST(Field, OctetPolynomialIsPrimitive) {
  const Field f(8, 0x11D);
  GfElement x = 2;
  int order = 1;
  while (x != 1) {
    x = clmul_mod(x, 2, 0x11D, 8);
    ++order;
  }
  EXPECT_EQ(order, 255);
  EXPECT_EQ(f.order(), 255U);
}

TEST(Field, EveryDefaultPolynomialIsPrimitive) {
  for (int m = 3; m <= 16; ++m) {
    EXPECT_NO_THROW(Field::standard(m)) << "m = " << m;
  }
}

TEST(Field, MultiplicationMatchesReferenceExhaustively) {
  const Field f = Field::standard(4);
  for (GfElement a = 0; a < 16; ++a) {
    EXPECT_EQ(f.mul(a, 1), a);
    EXPECT_EQ(f.mul(a, 0), 0U);
    for (GfElement b = 0; b < 16; ++b) EXPECT_EQ(f.mul(a, b), clmul_mod(a, b, 0x13, 4));
  }
  EXPECT_EQ(f.mul(0b1000, 0b0010), 0b0011U);
}

TEST(Field, MultiplicationMatchesReferenceInGf256) {
  const Field f = Field::standard(8);
  for (GfElement a = 0; a < 256; ++a) {
    for (GfElement b = 0; b < 256; ++b) ASSERT_EQ(f.mul(a, b), clmul_mod(a, b, 0x11D, 8));
  }
}

TEST(Field, InverseOfEveryNonzeroElement) {
  const Field f = Field::standard(4);
  EXPECT_EQ(f.inv(1), 1U);
  for (GfElement a = 1; a < 16; ++a) EXPECT_EQ(f.mul(a, f.inv(a)), 1U);
  EXPECT_THROW(f.inv(0), std::domain_error);
  EXPECT_THROW(f.div(3, 0), std::domain_error);
}

TEST(Field, LagrangeDistributivityAndLogRoundTrip) {
  const Field f = Field::standard(4);
  for (GfElement a = 1; a < 16; ++a) {
    EXPECT_EQ(f.pow(a, 15), 1U);
    EXPECT_EQ(f.alpha_pow(f.log(a)), a);
  }
  for (GfElement a = 0; a < 16; ++a) {
    for (GfElement b = 0; b < 16; ++b) {
      for (GfElement c = 0; c < 16; ++c) EXPECT_EQ(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
    }
  }
  EXPECT_EQ(f.alpha_pow(-1), f.inv(2));
  EXPECT_EQ(f.pow(7, -1), f.inv(7));
}

TEST(Field, PolynomialEvaluation) {
  const Field f = Field::standard(4);
  const std::vector<GfElement> constant{9};
  const std::vector<GfElement> identity{0, 1};
  const std::vector<GfElement> quadratic{1, 1, 1};
  for (GfElement x = 0; x < 16; ++x) {
    EXPECT_EQ(f.poly_eval(constant, x), 9U);
    EXPECT_EQ(f.poly_eval(identity, x), x);
  }
  const GfElement alpha = 2;
  const GfElement expected = 1 ^ alpha ^ clmul_mod(alpha, alpha, 0x13, 4);
  EXPECT_EQ(f.poly_eval(quadratic, alpha), expected);
  EXPECT_EQ(f.poly_eval(std::vector<GfElement>{}, 5), 0U);
}
