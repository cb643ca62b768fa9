#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fuzzvault/attack.hpp"
#include "fuzzvault/authsys.hpp"
#include "fuzzvault/inversion.hpp"
#include "fuzzvault/reconstructor.hpp"

namespace fuzzvault {

/// Everything an experiment depends on. Loaded from an INI file with one
/// section per stage; unspecified keys keep these defaults.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "fuzzvault_out";

  // [population]
  std::size_t users = 300;
  std::size_t calibration_identities = 1000;
  std::size_t db_size = 5000;  // auxiliary identities, one DB entry each
  std::size_t d_latent = 128;
  double noise_sigma = 0.7;

  // [system]
  std::size_t d = 128;
  std::size_t n_out = 127;
  SketchBackend backend = SketchBackend::kBch;
  double far = 0.001;  // operating point of the protected system

  // [attack]
  bool stop_at_first = false;

  // [inversion]
  TrainConfig train;
  std::size_t hidden = 256;
  std::size_t train_pairs = 20000;
  std::size_t validation_pairs = 1000;
  std::size_t heldout_pairs = 2000;

  // [reconstruct]
  // Inverted templates sit off the embedding manifold; a stiffer ridge transfers better across extractors.
  double ridge_lambda = 10.0;
  std::size_t map_samples = 4;  // images per auxiliary identity

  // [evaluate]
  std::uint64_t enroll_sample = 0;
  std::uint64_t other_sample = 1;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
  std::uint64_t sub_seed(std::string_view label) const;
};

ExperimentConfig parse_experiment_config(std::string_view ini_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// INI text that parses back to the same config.
std::string to_ini(const ExperimentConfig& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Accepts the FAR as a percentage ("1.0", "0.1") and returns the fraction.
double parse_far_percent(std::string_view text);

/// Carries the failing stage so the CLI can report it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Deterministic objects every stage rebuilds from the config.
struct ExperimentWorld {
  Population calibration;
  Population users;
  Population aux;
  Extractor extractor_a;
  Extractor extractor_b;
  ProjectionMatrix projection_a;
  ProjectionMatrix projection_b;
};

ExperimentWorld build_world(const ExperimentConfig& cfg);

std::string user_id(std::size_t identity);

/// Artifact names inside cfg.out_dir.
namespace artifact {
inline constexpr const char* kConfig = "config.ini";
inline constexpr const char* kPopulation = "population.json";
inline constexpr const char* kUserEmbeddings = "user_embeddings.csv";
inline constexpr const char* kThresholdsA = "thresholds_A.json";
inline constexpr const char* kThresholdsB = "thresholds_B.json";
inline constexpr const char* kSystem = "system.json";
inline constexpr const char* kStore = "users.jsonl";
inline constexpr const char* kGuessDb = "guess_db.json";
inline constexpr const char* kAttack = "attack.json";
inline constexpr const char* kAttackCsv = "attack.csv";
inline constexpr const char* kHistogram = "hit_histogram.csv";
inline constexpr const char* kInverter = "inverter.json";
inline constexpr const char* kLossHistory = "loss_history.csv";
inline constexpr const char* kInversionQuality = "inversion_quality.json";
inline constexpr const char* kInverseMap = "inverse_map.json";
inline constexpr const char* kReconstructions = "reconstructions.json";
inline constexpr const char* kScenariosCsv = "scenarios.csv";
inline constexpr const char* kScenariosMd = "scenarios.md";
inline constexpr const char* kScenariosJson = "scenarios.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kReportMd = "report.md";
}  // namespace artifact

struct Logger {
  std::function<void(const std::string&)> info;
  void operator()(const std::string& msg) const {
    if (info) info(msg);
  }
};

void stage_gen_population(const ExperimentConfig& cfg, const Logger& log = {});
/// Writes thresholds for both extractors.
void stage_calibrate(const ExperimentConfig& cfg, const Logger& log = {});
/// Protected system at cfg.far; every user enrolls image cfg.enroll_sample.
void stage_enroll(const ExperimentConfig& cfg, const Logger& log = {});
void stage_build_db(const ExperimentConfig& cfg, const Logger& log = {});
void stage_attack(const ExperimentConfig& cfg, const Logger& log = {});
/// With `resume`, an existing inverter trained under the same settings is
/// reused and training is skipped. Returns true when training ran.
bool stage_train_inverter(const ExperimentConfig& cfg, bool resume, const Logger& log = {});
void stage_reconstruct(const ExperimentConfig& cfg, const Logger& log = {});
void stage_evaluate(const ExperimentConfig& cfg, const Logger& log = {});
/// Collects every stage summary into report.json / report.md.
nlohmann::json stage_report(const ExperimentConfig& cfg, const Logger& log = {});

/// All stages in order; failures are rethrown as StageError.
nlohmann::json run_full_pipeline(const ExperimentConfig& cfg, bool resume, const Logger& log = {});

/// Verification exit codes.
inline constexpr int kAccept = 0;
inline constexpr int kReject = 1;
inline constexpr int kError = 2;

/// Verifies image `sample` of `user` against the enrolled store.
bool verify_user(const ExperimentConfig& cfg, const std::string& user, std::uint64_t sample);
/// Verifies the first row of an embeddings CSV as `user`.
bool verify_probe(const ExperimentConfig& cfg, const std::string& user, const std::filesystem::path& probe_csv);

/// The report with every timestamp field removed.
nlohmann::json strip_timestamps(nlohmann::json j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace fuzzvault
