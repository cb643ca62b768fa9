#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fuzzvault/binarize.hpp"
#include "fuzzvault/embedder.hpp"

namespace fuzzvault {

/// Linear map from feature space back to the latent ("image") space.
struct InverseMap {
  Eigen::MatrixXd matrix;  // d_latent x d
  Eigen::VectorXd bias;    // d_latent
  double ridge_lambda = 0.0;
  /// Root mean squared residual norm over the fitting pairs.
  double fit_residual = 0.0;

  std::size_t d() const { return static_cast<std::size_t>(matrix.cols()); }
  std::size_t d_latent() const { return static_cast<std::size_t>(matrix.rows()); }
};

/// Ridge regression minimizing sum ||R v + r0 - x||^2 + lambda ||R||_F^2 over
/// paired columns of `latents` (d_latent x N) and `embeddings` (d x N).
/// Throws std::invalid_argument with fewer than d_latent pairs, a column count
/// mismatch, a negative lambda, or a singular design at lambda = 0.
InverseMap fit_inverse_map(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& embeddings,
                           double ridge_lambda = 1e-3);

/// normalize(R v_hat + r0).
Eigen::VectorXd reconstruct(const InverseMap& map, const FeatureVector& v_hat);

struct AuxPairs {
  Eigen::MatrixXd latents;
  Eigen::MatrixXd embeddings;
};

/// Images of every identity for sample seeds 0..samples-1 with their
/// embeddings under `extractor`.
AuxPairs make_aux_pairs(const Population& pop, const Extractor& extractor, std::size_t samples_per_identity);

nlohmann::json to_json(const InverseMap& map);
InverseMap inverse_map_from_json(const nlohmann::json& j);

enum class Scenario { kSisfe, kDisfe, kSidfe, kDidfe };
enum class MatchSpace { kFeature, kBinary };
/// What is presented to the verifier: the attack's reconstruction, the
/// reconstruction of the true feature vector, or a genuine image.
enum class ProbeSource { kAttack, kOriginal, kSystem };

inline constexpr Scenario kScenarios[] = {Scenario::kSisfe, Scenario::kDisfe, Scenario::kSidfe, Scenario::kDidfe};
inline constexpr double kScenarioFars[] = {0.01, 0.001};

std::string_view to_string(Scenario s);
std::string_view to_string(MatchSpace s);
std::string_view to_string(ProbeSource s);
bool different_image(Scenario s);
bool different_extractor(Scenario s);

/// One verifier: extractor, binarization and calibrated thresholds.
struct VerifierSystem {
  Extractor extractor;
  ProjectionMatrix projection;
  Thresholds thresholds;
};

struct ScenarioAccount {
  std::size_t identity = 0;  // column of the user population
  bool unlocked = false;     // guessing stage outcome
};

struct ScenarioSetup {
  std::uint64_t enroll_sample = 0;  // image enrolled in the target system
  std::uint64_t other_sample = 1;   // second image for the different-image scenarios
};

struct ScenarioResult {
  Scenario scenario = Scenario::kSisfe;
  MatchSpace space = MatchSpace::kFeature;
  ProbeSource source = ProbeSource::kAttack;
  double far_target = 0.0;
  std::size_t n_accounts = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  /// success_rate times the guessing unlock rate (equal to success_rate for
  /// non-attack sources).
  double success_rate_full_attack = 0.0;
  /// Fraction of accounts that were unlocked and whose probe passed.
  double joint_rate = 0.0;
};

/// Scores every (source, scenario, space, FAR) combination. Same-extractor
/// scenarios verify against `a`, different-extractor ones against `b`.
/// `attack_latents[i]` is the reconstruction for accounts[i];
/// `original_latents` may be empty to skip the kOriginal rows.
/// Throws std::invalid_argument on mismatched account/latent counts or when
/// both systems use the same extractor seed.
std::vector<ScenarioResult> evaluate_scenarios(const VerifierSystem& a, const VerifierSystem& b,
                                               const Population& users, std::span<const ScenarioAccount> accounts,
                                               std::span<const Eigen::VectorXd> attack_latents,
                                               std::span<const Eigen::VectorXd> original_latents,
                                               const ScenarioSetup& setup = {});

const ScenarioResult& find_result(std::span<const ScenarioResult> results, ProbeSource source, Scenario scenario,
                                  MatchSpace space, double far);

std::string scenario_csv(std::span<const ScenarioResult> results);
/// One table per scenario; attack cells carry the full-attack rate in parentheses.
std::string scenario_markdown(std::span<const ScenarioResult> results);
nlohmann::json to_json(std::span<const ScenarioResult> results);

}  // namespace fuzzvault
