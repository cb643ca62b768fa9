#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fuzzvault/binarize.hpp"

using namespace fuzzvault;

TEST(Projection, ReproducibleFromSeed) {
  const auto a = ProjectionMatrix::generate(42, 128, 127);
  const auto b = ProjectionMatrix::generate(42, 128, 127);
  const auto c = ProjectionMatrix::generate(43, 128, 127);
  EXPECT_EQ(a.d_in(), 128U);
  EXPECT_EQ(a.n_out(), 127U);
  EXPECT_EQ(a.entries(), b.entries());
  EXPECT_NE(a.entries(), c.entries());
}

TEST(Projection, EntriesLookStandardNormal) {
  const auto w = ProjectionMatrix::generate(1, 128, 256);
  const double n = static_cast<double>(w.entries().size());
  const double mean = w.entries().mean();
  const double var = (w.entries().array() - mean).square().sum() / n;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Binarize, SignOfProjection) {
  const auto w = ProjectionMatrix::generate(2, 16, 31);
  Eigen::VectorXd v = Eigen::VectorXd::Random(16);
  const BitVector b = binarize(v, w);
  ASSERT_EQ(b.size(), 31U);
  for (std::size_t j = 0; j < 31; ++j) {
    EXPECT_EQ(b.get(j), w.entries().col(static_cast<Eigen::Index>(j)).dot(v) >= 0.0);
  }
  EXPECT_EQ(binarize(3.5 * v, w), b);
  EXPECT_EQ(binarize(-v, w), ~b);
  EXPECT_EQ(binarize(Eigen::VectorXd::Zero(16), w).popcount(), 31U);
  EXPECT_THROW(binarize(Eigen::VectorXd::Zero(15), w), std::invalid_argument);
}

// Random hyperplanes split two vectors at angle theta with probability theta / pi.
TEST(Binarize, DisagreementRateTracksAngle) {
  const std::size_t bits = 20000;
  const auto w = ProjectionMatrix::generate(3, 8, bits);
  for (double theta : {0.2, 0.8, 1.5, 2.6}) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
    u(0) = 1.0;
    v(0) = std::cos(theta);
    v(1) = std::sin(theta);
    const double p = theta / std::numbers::pi;
    const double rate = static_cast<double>(hamming(binarize(u, w), binarize(v, w))) / bits;
    EXPECT_NEAR(rate, p, 4.0 * std::sqrt(p * (1 - p) / bits)) << "theta " << theta;
  }
}

TEST(Binarize, ToReal) {
  BitVector b(5);
  b.set(1, true);
  b.set(4, true);
  const Eigen::VectorXd r = to_real(b);
  EXPECT_EQ(r, (Eigen::VectorXd(5) << 0, 1, 0, 0, 1).finished());
}
