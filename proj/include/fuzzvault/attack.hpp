#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fuzzvault/binarize.hpp"
#include "fuzzvault/commitment.hpp"
#include "fuzzvault/embedder.hpp"

namespace fuzzvault {

struct GuessEntry {
  std::string label;
  BitVector bits;
};

/// Public auxiliary templates. Feature vectors are kept alongside for the
/// unprotected baseline; the protected attack only reads the bits.
struct GuessDatabase {
  std::string provenance;
  std::vector<GuessEntry> entries;
  Eigen::MatrixXd features;  // d x size(), column i belongs to entries[i]

  std::size_t size() const { return entries.size(); }
  std::size_t template_bits() const { return entries.empty() ? 0 : entries.front().bits.size(); }
};

/// One template per distinct identity label (its first sample, in file order).
GuessDatabase build_db(std::span<const LabeledEmbedding> embeddings, const ProjectionMatrix& w,
                       std::string provenance = {});

/// Sample 0 of every identity in `pop`, labelled "aux<i>". An empty
/// population gives an empty database.
GuessDatabase build_db(const Population& pop, const Extractor& extractor, const ProjectionMatrix& w);

struct GuessOutcome {
  bool unlocked = false;
  std::optional<std::size_t> winning_entry;
  std::size_t hit_count = 0;
  std::size_t guesses_tried = 0;
  /// Template recovered from the winning entry, hash-verified.
  std::optional<BitVector> recovered_template;
};

/// Tries DB entries in index order against one record. With stop_at_first the
/// loop ends at the lowest-index hit; otherwise every entry is decoded and
/// hits are counted. Only the record and the public DB are consulted.
GuessOutcome guess_account(const CommitmentScheme& scheme, const ProtectedRecord& record, const GuessDatabase& db,
                           bool stop_at_first);

/// b-hat from an unlocking guess. Throws std::invalid_argument when b_prime
/// does not unlock the record.
BitVector recover_template(const CommitmentScheme& scheme, const ProtectedRecord& record, const BitVector& b_prime);

/// Cosine-threshold guessing against an unprotected template.
GuessOutcome guess_unprotected(const FeatureVector& enrolled, const GuessDatabase& db, double cosine_threshold,
                               bool stop_at_first);

struct DispersionTest {
  double mean = 0.0;
  double variance = 0.0;           // of per-account hit probabilities
  double binomial_variance = 0.0;  // p(1-p)/|DB| under a common p
  double statistic = 0.0;          // chi-square, accounts - 1 degrees of freedom
  double p_value = 1.0;
};

struct HitStatistics {
  std::size_t db_size = 0;
  std::vector<std::size_t> hits;
  std::vector<double> probabilities;
  /// bins[k] counts accounts with probability in [k, k + 1) * bin_width.
  double bin_width = 1e-3;
  std::vector<std::size_t> bins;
  DispersionTest dispersion;

  double mean() const { return dispersion.mean; }
};

HitStatistics hit_histogram(const CommitmentScheme& scheme, std::span<const ProtectedRecord> records,
                            const GuessDatabase& db);
HitStatistics hit_statistics(std::vector<std::size_t> hits, std::size_t db_size);

/// Overdispersion of hit counts out of `trials` each relative to a common
/// binomial rate.
DispersionTest dispersion_test(std::span<const std::size_t> hits, std::size_t trials);

/// Predicted unlock rate: mean over accounts of 1 - (1 - p_i)^db_size.
double predicted_unlock_rate(std::span<const double> probabilities, std::size_t db_size);

/// Unbiased estimate of 1 - (1 - p)^db_size from `hits` successes in `trials` independent
/// guesses (trials >= db_size): one minus the chance that db_size of the trials, drawn
/// without replacement, all miss.
double unlock_probability_estimate(std::size_t hits, std::size_t trials, std::size_t db_size);

struct AccountResult {
  std::string user_id;
  bool unlocked = false;
  std::size_t guesses_tried = 0;
  std::size_t hit_count = 0;
  std::optional<std::size_t> winning_entry;
  std::optional<BitVector> recovered_template;
};

struct AttackReport {
  std::string scheme_id;
  std::string db_provenance;
  std::size_t db_size = 0;
  bool stop_at_first = true;
  std::vector<AccountResult> accounts;

  std::size_t unlocked() const;
  double unlock_rate() const;
};

struct TargetAccount {
  std::string user_id;
  ProtectedRecord record;
};

AttackReport run_attack(const CommitmentScheme& scheme, std::span<const TargetAccount> targets, const GuessDatabase& db,
                        bool stop_at_first);

nlohmann::json to_json(const AttackReport& report);
AttackReport attack_report_from_json(const nlohmann::json& j);
std::string to_csv(const AttackReport& report);
std::string histogram_csv(const HitStatistics& stats);
/// Histogram of an exhaustive (stop_at_first = false) report.
HitStatistics hit_statistics(const AttackReport& report);

nlohmann::json to_json(const GuessDatabase& db);
GuessDatabase guess_database_from_json(const nlohmann::json& j);

}  // namespace fuzzvault
