#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "fuzzvault/embedder.hpp"
#include "fuzzvault/inversion.hpp"

using namespace fuzzvault;

namespace {

PairSet synthetic_pairs(std::size_t n, std::size_t d, std::uint64_t seed, const ProjectionMatrix& w) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  std::vector<FeatureVector> vs;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = g(rng);
    vs.push_back(v.normalized());
  }
  return make_pairs(vs, w);
}

}  // namespace

TEST(Mlp, ShapesAndInitRange) {
  const Mlp net = Mlp::standard(1);
  EXPECT_EQ(net.dims(), (std::vector<std::size_t>{128, 256, 256, 128}));
  EXPECT_EQ(net.parameter_count(), 128U * 256 + 256 + 256 * 256 + 256 + 256 * 128 + 128);
  const double limit = std::sqrt(6.0 / (256 + 256));
  EXPECT_LE(net.layers()[1].weight.cwiseAbs().maxCoeff(), limit);
  EXPECT_GT(net.layers()[1].weight.cwiseAbs().maxCoeff(), 0.9 * limit);
  EXPECT_EQ(net.layers()[0].bias, Eigen::VectorXd::Zero(256));
}

TEST(Mlp, ForwardBasics) {
  Mlp net = Mlp::standard(2);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(128);
  const Eigen::VectorXd y = net.forward(x);
  EXPECT_GT(y.minCoeff(), 0.0);
  EXPECT_LT(y.maxCoeff(), 1.0);
  EXPECT_EQ(net.forward(x), y);
  std::vector<double> zeros(net.parameter_count(), 0.0);
  net.unflatten(zeros);
  EXPECT_EQ(net.forward(x), Eigen::VectorXd::Constant(128, 0.5));
  EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Losses, AnalyticValues) {
  const Eigen::MatrixXd half = Eigen::MatrixXd::Constant(4, 3, 0.5);
  Eigen::MatrixXd bits(4, 3);
  bits << 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0;
  EXPECT_NEAR(bce(half, bits, 1e-7), std::numbers::ln2, 1e-15);
  EXPECT_LT(bce(bits, bits, 1e-7), 2e-7);
  EXPECT_DOUBLE_EQ(mse(bits, bits), 0.0);
  EXPECT_DOUBLE_EQ(mse(half, bits), 0.25);
}

TEST(Losses, PerfectNetworksReachTheFloor) {
  // Identity nets on 0/1 data with saturating sigmoids are near optimal.
  const std::size_t dims[] = {6, 6};
  Mlp f = Mlp::create(dims, 1);
  f.layers()[0].weight = 60.0 * Eigen::MatrixXd::Identity(6, 6);
  f.layers()[0].bias = Eigen::VectorXd::Constant(6, -30.0);
  Mlp g = f;
  Eigen::MatrixXd b(6, 2);
  b << 1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 0, 1;
  const auto t = loss_total(f, g, b, b, 0.85, 1e-7);
  for (double v : {t.f_pred, t.g_pred, t.cyc_ftr, t.cyc_bin}) EXPECT_LT(v, 2e-7);
  const auto zero = loss_total(f, g, b, b, 0.0, 1e-7);
  EXPECT_DOUBLE_EQ(zero.f_total, zero.f_pred);
  EXPECT_DOUBLE_EQ(zero.g_total, zero.g_pred);
}

TEST(GradientCheck, LinearSingleLayerMse) {
  const std::size_t dims[] = {5, 3};
  Mlp net = Mlp::create(dims, 3, Activation::kIdentity);
  net.layers()[0].bias = Eigen::VectorXd::Random(3);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 7);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(3, 7);
  const double err = gradient_check(
      net, [&](const Mlp& n) { return mse(n.forward_batch(x), y); },
      [&](const Mlp& n) {
        auto grads = n.zero_gradients();
        const Tape t = n.forward_tape(x);
        n.backward(t, mse_grad(t.output(), y), grads);
        return grads;
      });
  EXPECT_LT(err, 1e-7);
}

TEST(GradientCheck, CombinedLossAtDimensionEight) {
  const auto w = ProjectionMatrix::generate(4, 8, 8);
  const PairSet p = synthetic_pairs(6, 8, 5, w);
  const FeatureCode code;
  Mlp f = Mlp::standard(6, 8, 16);
  Mlp g = Mlp::standard(7, 8, 16);
  EXPECT_LT(joint_gradient_check(f, g, code.encode(p.v), p.b, 0.85, 1e-7), 1e-4);
  EXPECT_LT(joint_gradient_check(f, g, code.encode(p.v), p.b, 0.0, 1e-7), 1e-4);
}

TEST(GradientCheck, ZeroInputStaysFinite) {
  Mlp f = Mlp::standard(8, 8, 16);
  Mlp g = Mlp::standard(9, 8, 16);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(8, 4);
  const auto jg = joint_gradients(f, g, zero, zero, 0.85, 1e-7);
  for (const auto& l : jg.f) EXPECT_TRUE(l.weight.allFinite() && l.bias.allFinite());
  for (const auto& l : jg.g) EXPECT_TRUE(l.weight.allFinite() && l.bias.allFinite());
}

TEST(Train, OverfitsTinyDataset) {
  const auto w = ProjectionMatrix::generate(10, 8, 8);
  const PairSet p = synthetic_pairs(10, 8, 11, w);
  Mlp f = Mlp::standard(12, 8, 32);
  Mlp g = Mlp::standard(13, 8, 32);
  TrainConfig cfg;
  cfg.epochs = 10000;
  cfg.batch_size = 10;
  cfg.patience = 0;
  Rng rng(14);
  const auto result = train(f, g, p, PairSet{}, cfg, rng);
  ASSERT_EQ(result.history.size(), 10000U);
  const auto q = evaluate_inversion(f, g, p, w, cfg.code, 0.0);
  EXPECT_GT(q.mean_cosine, 0.95);
  EXPECT_LT(result.history.back().train.g_total, result.history.front().train.g_total);
}

TEST(Train, DeterministicAndDivergenceDetected) {
  const auto w = ProjectionMatrix::generate(20, 8, 8);
  const PairSet p = synthetic_pairs(40, 8, 21, w);
  TrainConfig cfg;
  cfg.epochs = 5;
  auto run = [&](const TrainConfig& c, const PairSet& data) {
    Mlp f = Mlp::standard(22, 8, 16);
    Mlp g = Mlp::standard(23, 8, 16);
    Rng rng(24);
    return loss_history_csv(train(f, g, data, slice(p, 0, 10), c, rng));
  };
  EXPECT_EQ(run(cfg, p), run(cfg, p));
  PairSet poisoned = p;
  poisoned.v(3, 17) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(run(cfg, poisoned), std::runtime_error);
  cfg.learning_rate = 0;
  EXPECT_THROW(run(cfg, p), std::invalid_argument);
}

TEST(Train, EarlyStopsWhenValidationStalls) {
  const auto w = ProjectionMatrix::generate(30, 8, 8);
  const PairSet p = synthetic_pairs(20, 8, 31, w);
  Mlp f = Mlp::standard(32, 8, 16);
  Mlp g = Mlp::standard(33, 8, 16);
  TrainConfig cfg;
  cfg.epochs = 5000;
  cfg.patience = 3;
  cfg.learning_rate = 1e-300;  // updates vanish below double resolution
  Rng rng(34);
  const auto r = train(f, g, p, p, cfg, rng);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_LT(r.history.size(), 5000U);
}

TEST(Inverter, SerializationRoundTrip) {
  InverterBundle bundle{Mlp::standard(40, 8, 16), Mlp::standard(41, 8, 16), TrainConfig{}, 77};
  bundle.config.code.spread = 0.3;
  const auto path = std::filesystem::temp_directory_path() / "fuzzvault_inverter_test.json";
  save_inverter(path, bundle);
  const auto back = load_inverter(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.f.flatten(), bundle.f.flatten());
  EXPECT_EQ(back.g.flatten(), bundle.g.flatten());
  EXPECT_EQ(back.projection_seed, 77U);
  EXPECT_DOUBLE_EQ(back.config.code.spread, 0.3);
  BitVector b(8);
  b.set(2, true);
  EXPECT_EQ(invert(back.g, b, back.config.code), invert(bundle.g, b, bundle.config.code));
  EXPECT_NEAR(invert(back.g, b, back.config.code).norm(), 1.0, 1e-12);
}

TEST(FeatureCode, RoundTrip) {
  const FeatureCode code{0.25};
  const Eigen::VectorXd v = Eigen::VectorXd::Random(128).normalized();
  EXPECT_DOUBLE_EQ(code.kappa(128), 0.25 * std::sqrt(128.0));
  EXPECT_TRUE(code.decode(code.encode(v)).isApprox(v, 1e-12));
}
