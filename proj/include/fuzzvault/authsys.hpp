#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "fuzzvault/binarize.hpp"
#include "fuzzvault/commitment.hpp"
#include "fuzzvault/embedder.hpp"
#include "fuzzvault/stats.hpp"

namespace fuzzvault {

enum class SystemMode { kProtected, kUnprotected };

std::string_view to_string(SystemMode mode);
SystemMode parse_mode(std::string_view name);

struct SystemConfig {
  std::string extractor_id;
  std::uint64_t projection_seed = 0;
  std::size_t d = 128;
  std::size_t n_out = 127;
  SketchBackend backend = SketchBackend::kBch;
  /// Code capacity; must equal hamming_threshold.
  std::size_t t = 0;
  double cosine_threshold = 0.0;
  int hamming_threshold = 0;
  SystemMode mode = SystemMode::kProtected;
  std::filesystem::path store_path;

  /// Throws std::invalid_argument when the parameters do not fit together.
  void validate() const;
};

/// Fills thresholds and t from a calibration at `far` (0.01 or 0.001).
SystemConfig configure(const Thresholds& thresholds, double far, std::uint64_t projection_seed, std::size_t d,
                       std::size_t n_out, SketchBackend backend);

nlohmann::json to_json(const SystemConfig& c);
SystemConfig system_config_from_json(const nlohmann::json& j);

struct EnrollmentRecord {
  std::string user_id;
  std::optional<ProtectedRecord> protected_record;
  std::optional<FeatureVector> unprotected_template;
  std::string enrolled_at;
};

nlohmann::json to_json(const EnrollmentRecord& r);
EnrollmentRecord enrollment_from_json(const nlohmann::json& j);

/// ISO-8601 UTC, second resolution.
std::string utc_timestamp();

/// Append-only JSON-lines file of enrollment records.
class UserStore {
 public:
  UserStore() = default;
  /// Loads an existing file; a missing file is an empty store.
  explicit UserStore(std::filesystem::path path);

  bool contains(const std::string& user_id) const { return records_.count(user_id) != 0; }
  const EnrollmentRecord& get(const std::string& user_id) const;
  const std::map<std::string, EnrollmentRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// Rejects duplicates; appends to the file when the store has a path.
  void add(EnrollmentRecord record);

 private:
  std::filesystem::path path_;
  std::map<std::string, EnrollmentRecord> records_;
};

struct AuthResult {
  bool accepted = false;
  std::optional<BitVector> recovered_template;
};

class AuthSystem {
 public:
  using Clock = std::function<std::string()>;

  /// Opens the store at config.store_path (in memory when empty).
  explicit AuthSystem(SystemConfig config, Clock clock = utc_timestamp);

  const SystemConfig& config() const { return config_; }
  const ProjectionMatrix& projection() const { return w_; }
  const CommitmentScheme& scheme() const { return *scheme_; }
  const UserStore& store() const { return store_; }

  const EnrollmentRecord& enroll(const std::string& user_id, const FeatureVector& v, Rng& rng);
  /// A zero or non-finite probe is rejected. Throws std::out_of_range for an
  /// unknown user.
  AuthResult authenticate(const std::string& user_id, const FeatureVector& v_probe) const;

 private:
  SystemConfig config_;
  Clock clock_;
  ProjectionMatrix w_;
  std::unique_ptr<CommitmentScheme> scheme_;
  UserStore store_;
};

struct RateEstimate {
  std::size_t trials = 0;
  std::size_t errors = 0;
  double rate = 0.0;
  Interval ci;
};

struct ModeRates {
  RateEstimate far;
  RateEstimate frr;
};

struct SystemRates {
  ModeRates protected_mode;
  ModeRates unprotected_mode;
};

/// Empirical FAR/FRR of both verification modes. Genuine trials enroll sample
/// 0 and probe sample 1 + (trial / population); impostor trials pair random
/// distinct identities. Throws when the population has fewer than two
/// identities or n_impostor * target_far < 1.
SystemRates measure_rates(const SystemConfig& config, const Population& pop, const Extractor& extractor,
                          std::size_t n_genuine, std::size_t n_impostor, double target_far, std::uint64_t seed);

}  // namespace fuzzvault
