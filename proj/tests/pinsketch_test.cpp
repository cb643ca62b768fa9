#include <gtest/gtest.h>

#include <algorithm>
#include <iterator>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "fuzzvault/pinsketch.hpp"

using fuzzvault::PinSketch;

namespace {

std::vector<std::uint32_t> random_set(std::uint32_t universe, std::size_t size, std::mt19937_64& rng) {
  std::set<std::uint32_t> s;
  std::uniform_int_distribution<std::uint32_t> pick(1, universe);
  while (s.size() < size) s.insert(pick(rng));
  return {s.begin(), s.end()};
}

std::vector<std::uint32_t> sym_diff(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::vector<std::uint32_t> out;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// B with exactly `changes` elements toggled relative to A.
std::vector<std::uint32_t> perturb(const std::vector<std::uint32_t>& a, std::uint32_t universe, std::size_t changes,
                                   std::mt19937_64& rng) {
  std::vector<std::uint32_t> all(universe);
  for (std::uint32_t i = 0; i < universe; ++i) all[i] = i + 1;
  std::shuffle(all.begin(), all.end(), rng);
  std::set<std::uint32_t> b(a.begin(), a.end());
  for (std::size_t i = 0; i < changes; ++i) {
    if (!b.erase(all[i])) b.insert(all[i]);
  }
  return {b.begin(), b.end()};
}

}  // namespace

TEST(PinSketch, EmptySetHasZeroSketch) {
  const PinSketch ps(8, 10);
  const auto s = ps.sketch({});
  EXPECT_EQ(s.t, 10U);
  ASSERT_EQ(s.syndromes.size(), 10U);
  for (auto v : s.syndromes) EXPECT_EQ(v, 0U);
}

TEST(PinSketch, SingletonSyndromesArePowers) {
  const PinSketch ps(8, 4);
  const std::vector<std::uint32_t> one{37};
  const auto s = ps.sketch(one);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(s.syndromes[i], ps.field().alpha_pow(static_cast<long long>(37 * (2 * i + 1))));
  }
  // Index 2^m - 1 stands for alpha^0 = 1.
  const std::vector<std::uint32_t> top{255};
  for (auto v : ps.sketch(top).syndromes) EXPECT_EQ(v, 1U);
}

TEST(PinSketch, SketchIsLinearUnderSymmetricDifference) {
  const PinSketch ps(8, 12);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_set(255, 40, rng);
    const auto b = random_set(255, 55, rng);
    EXPECT_EQ(ps.sketch(a) ^ ps.sketch(b), ps.sketch(sym_diff(a, b)));
  }
}

TEST(PinSketch, RecoversWithinCapacity) {
  const PinSketch ps(8, 10);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_set(255, 60, rng);
    const auto b = perturb(a, 255, static_cast<std::size_t>(trial) % 11, rng);
    const auto got = ps.recover(ps.sketch(a), b);
    ASSERT_TRUE(got.has_value()) << "trial " << trial;
    EXPECT_EQ(*got, sym_diff(a, b));
  }
}

TEST(PinSketch, RecoveryBeyondCapacityIsRareAndConsistent) {
  const PinSketch ps(8, 6);
  std::mt19937_64 rng(23);
  int wrong = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_set(255, 60, rng);
    const auto b = perturb(a, 255, 7 + static_cast<std::size_t>(trial % 10), rng);
    const auto got = ps.recover(ps.sketch(a), b);
    if (!got) continue;
    EXPECT_LE(got->size(), 6U);
    EXPECT_NE(*got, sym_diff(a, b));
    ++wrong;
  }
  EXPECT_LT(wrong, 50);
}

TEST(PinSketch, RejectsInvalidInput) {
  const PinSketch ps(7, 5);
  EXPECT_EQ(ps.universe_size(), 127U);
  const std::vector<std::uint32_t> zero{0};
  const std::vector<std::uint32_t> big{128};
  const std::vector<std::uint32_t> repeat{5, 5};
  EXPECT_THROW(ps.sketch(zero), std::invalid_argument);
  EXPECT_THROW(ps.sketch(big), std::invalid_argument);
  EXPECT_THROW(ps.sketch(repeat), std::invalid_argument);
  EXPECT_THROW(PinSketch(7, 0), std::invalid_argument);
  const PinSketch other(7, 6);
  EXPECT_THROW(ps.sketch({}) ^ other.sketch({}), std::invalid_argument);
}
