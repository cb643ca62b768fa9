#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "fuzzvault/bch.hpp"
#include "fuzzvault/reconstructor.hpp"

using namespace fuzzvault;

namespace {

VerifierSystem make_system(const std::string& id, std::uint64_t seed, const Population& calib) {
  auto ex = Extractor::generate(id, seed, calib.d_latent(), 128, 0.7);
  auto w = ProjectionMatrix::generate(seed + 1000, 128, 127);
  auto th = calibrate(collect_scores(calib, ex, w), id);
  return {std::move(ex), std::move(w), std::move(th)};
}

}  // namespace

TEST(InverseMap, RecoversAnExactAffineMap) {
  Rng rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(5, 6), v(6, 40);
  for (auto& x : a.reshaped()) x = g(rng);
  for (auto& x : v.reshaped()) x = g(rng);
  Eigen::VectorXd c(5);
  c << 1, -2, 3, 0.5, 0;
  const Eigen::MatrixXd x = (a * v).colwise() + c;
  const auto map = fit_inverse_map(x, v, 0.0);
  EXPECT_TRUE(map.matrix.isApprox(a, 1e-10));
  EXPECT_TRUE(map.bias.isApprox(c, 1e-10));
  EXPECT_LT(map.fit_residual, 1e-10);
}

TEST(InverseMap, NoiselessExtractorInverts) {
  const auto pop = gen_population(2, 600, 32);
  const auto ex = Extractor::generate("A", 3, 32, 32, 0.0);
  const auto pairs = make_aux_pairs(pop, ex, 1);
  const auto map = fit_inverse_map(pairs.latents, pairs.embeddings, 0.0);
  const auto fresh = gen_population(4, 50, 32);
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    const Eigen::VectorXd x = fresh.identities.col(static_cast<Eigen::Index>(i));
    EXPECT_GT(reconstruct(map, ex.embed(x)).dot(x), 0.99);
  }
  // The linear part is close to a multiple of the extractor inverse.
  const Eigen::MatrixXd prod = map.matrix * ex.map();
  const double scale = prod.trace() / 32.0;
  EXPECT_LT((prod / scale - Eigen::MatrixXd::Identity(32, 32)).norm(), 0.1 * std::sqrt(32.0));
}

TEST(InverseMap, RidgeTradesResidualForShrinkage) {
  const auto pop = gen_population(5, 400, 16);
  const auto ex = Extractor::generate("A", 6, 16, 16, 0.7);
  const auto pairs = make_aux_pairs(pop, ex, 2);
  double last_residual = 0.0, last_norm = 1e300;
  for (double lambda : {0.0, 1e-3, 1.0, 100.0}) {
    const auto map = fit_inverse_map(pairs.latents, pairs.embeddings, lambda);
    EXPECT_TRUE(std::isfinite(map.fit_residual));
    EXPECT_GE(map.fit_residual, last_residual - 1e-12);
    EXPECT_LE(map.matrix.norm(), last_norm + 1e-12);
    last_residual = map.fit_residual;
    last_norm = map.matrix.norm();
  }
  const auto map = fit_inverse_map(pairs.latents, pairs.embeddings);
  EXPECT_EQ(map.ridge_lambda, 1e-3);
  const FeatureVector v = pairs.embeddings.col(0);
  EXPECT_EQ(reconstruct(map, v), reconstruct(map, v));
  EXPECT_NEAR(reconstruct(map, v).norm(), 1.0, 1e-12);
  const auto back = inverse_map_from_json(nlohmann::json::parse(to_json(map).dump()));
  EXPECT_EQ(back.matrix, map.matrix);
  EXPECT_EQ(back.bias, map.bias);
  EXPECT_EQ(back.fit_residual, map.fit_residual);
}

TEST(InverseMap, RejectsDegenerateDesigns) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 7);
  EXPECT_THROW(fit_inverse_map(x, Eigen::MatrixXd::Random(8, 7), 0.0), std::invalid_argument);
  EXPECT_THROW(fit_inverse_map(x, Eigen::MatrixXd::Random(8, 6), 1.0), std::invalid_argument);
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(8, 30);
  v.row(3).setConstant(0.25);  // no variation along one axis
  const Eigen::MatrixXd x30 = Eigen::MatrixXd::Random(8, 30);
  EXPECT_THROW(fit_inverse_map(x30, v, 0.0), std::invalid_argument);
  EXPECT_NO_THROW(fit_inverse_map(x30, v, 1e-3));
  EXPECT_THROW(fit_inverse_map(x30, v, -1.0), std::invalid_argument);
}

class ScenarioTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    calib_ = new Population(gen_population(10, 400, 128));
    users_ = new Population(gen_population(11, 60, 128));
    a_ = new VerifierSystem(make_system("A", 12, *calib_));
    b_ = new VerifierSystem(make_system("B", 13, *calib_));
  }
  static void TearDownTestSuite() {
    delete calib_;
    delete users_;
    delete a_;
    delete b_;
  }
  static inline Population* calib_ = nullptr;
  static inline Population* users_ = nullptr;
  static inline VerifierSystem* a_ = nullptr;
  static inline VerifierSystem* b_ = nullptr;
};

TEST_F(ScenarioTest, EnrollmentImagesPassSameImageScenarios) {
  std::vector<ScenarioAccount> accounts;
  std::vector<Eigen::VectorXd> latents;
  for (std::size_t i = 0; i < users_->size(); ++i) {
    accounts.push_back({i, i % 4 != 0});
    latents.push_back(sample_image(*users_, i, 0.7, 0));
  }
  const auto res = evaluate_scenarios(*a_, *b_, *users_, accounts, latents, {});
  ASSERT_EQ(res.size(), 2U * 4 * 2 * 2);
  for (const auto space : {MatchSpace::kFeature, MatchSpace::kBinary}) {
    for (const double far : kScenarioFars) {
      for (const auto s : {Scenario::kSisfe, Scenario::kSidfe}) {
        EXPECT_EQ(find_result(res, ProbeSource::kAttack, s, space, far).success_rate, 1.0);
        EXPECT_EQ(find_result(res, ProbeSource::kSystem, s, space, far).success_rate, 1.0);
      }
      const auto& att = find_result(res, ProbeSource::kAttack, Scenario::kDisfe, space, far);
      EXPECT_EQ(att.success_rate, find_result(res, ProbeSource::kSystem, Scenario::kDisfe, space, far).success_rate);
      EXPECT_DOUBLE_EQ(att.success_rate_full_attack, att.success_rate * 0.75);
    }
  }
  EXPECT_THROW(find_result(res, ProbeSource::kOriginal, Scenario::kSisfe, MatchSpace::kFeature, 0.01),
               std::out_of_range);
}

TEST_F(ScenarioTest, RatesAreBoundedAndMonotoneInFar) {
  Rng rng(14);
  std::normal_distribution<double> g;
  std::vector<ScenarioAccount> accounts;
  std::vector<Eigen::VectorXd> attack, original;
  for (std::size_t i = 0; i < users_->size(); ++i) {
    accounts.push_back({i, (i * 7) % 3 == 0});
    Eigen::VectorXd noise(128);
    for (auto& x : noise) x = g(rng);
    const Eigen::VectorXd x = sample_image(*users_, i, 0.7, 0);
    attack.push_back(x + 0.15 * noise);
    original.push_back(x);
  }
  const auto res = evaluate_scenarios(*a_, *b_, *users_, accounts, attack, original);
  ASSERT_EQ(res.size(), 3U * 4 * 2 * 2);
  for (const auto& r : res) {
    EXPECT_GE(r.success_rate, 0.0);
    EXPECT_LE(r.success_rate, 1.0);
    EXPECT_LE(r.success_rate_full_attack, r.success_rate);
    EXPECT_LE(r.joint_rate, r.success_rate);
    EXPECT_EQ(r.n_accounts, users_->size());
    if (r.far_target == 0.001) {
      EXPECT_GE(find_result(res, r.source, r.scenario, r.space, 0.01).success_rate, r.success_rate);
    }
  }
  const std::string md = scenario_markdown(res);
  for (const auto s : kScenarios) EXPECT_NE(md.find(fmt::format("### {}", to_string(s))), std::string::npos);
  EXPECT_NE(md.find("| Original reconstruction |"), std::string::npos);
  const std::string csv = scenario_csv(res);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "source,scenario,space,far_target,n_accounts,successes,success_rate,success_rate_full_attack,joint_rate");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), res.size() + 1);
  EXPECT_EQ(to_json(res).size(), res.size());
}

TEST_F(ScenarioTest, RejectsMismatchedInputs) {
  std::vector<ScenarioAccount> accounts{{0, true}, {1, false}};
  std::vector<Eigen::VectorXd> one{sample_image(*users_, 0, 0.7, 0)};
  EXPECT_THROW(evaluate_scenarios(*a_, *b_, *users_, accounts, one, {}), std::invalid_argument);
  std::vector<Eigen::VectorXd> two{one[0], one[0]};
  EXPECT_THROW(evaluate_scenarios(*a_, *b_, *users_, accounts, two, one), std::invalid_argument);
  EXPECT_THROW(evaluate_scenarios(*a_, *a_, *users_, accounts, two, {}), std::invalid_argument);
  accounts[1].identity = 999;
  EXPECT_THROW(evaluate_scenarios(*a_, *b_, *users_, accounts, two, {}), std::invalid_argument);
  EXPECT_THROW(evaluate_scenarios(*a_, *b_, *users_, accounts, two, {}, {3, 3}), std::invalid_argument);
}
