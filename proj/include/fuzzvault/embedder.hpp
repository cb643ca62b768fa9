#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fuzzvault/binarize.hpp"

namespace fuzzvault {

/// Latent identity vectors (one unit-norm column per identity). The latent
/// plays the part of a face; extractors map it to feature vectors.
struct Population {
  std::uint64_t seed = 0;
  Eigen::MatrixXd identities;

  std::size_t size() const { return static_cast<std::size_t>(identities.cols()); }
  std::size_t d_latent() const { return static_cast<std::size_t>(identities.rows()); }
};

Population gen_population(std::uint64_t seed, std::size_t num_identities, std::size_t d_latent);

/// "Image" of an identity: x + sigma * g / sqrt(d_latent) with g standard
/// normal, seeded by (population seed, identity, sample seed). The perturbation
/// has expected norm sigma and does not depend on the extractor, so one image
/// can be shown to several extractors.
Eigen::VectorXd sample_image(const Population& pop, std::size_t identity, double sigma, std::uint64_t sample_seed);

/// Synthetic feature extractor v = normalize(M * image).
class Extractor {
 public:
  /// M has i.i.d. N(0, 1/d_latent) entries drawn from `seed`; throws if it is
  /// numerically rank deficient.
  static Extractor generate(std::string id, std::uint64_t seed, std::size_t d_latent, std::size_t d,
                            double noise_sigma);

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  double noise_sigma() const { return noise_sigma_; }
  std::size_t d() const { return static_cast<std::size_t>(map_.rows()); }
  std::size_t d_latent() const { return static_cast<std::size_t>(map_.cols()); }
  const Eigen::MatrixXd& map() const { return map_; }

  /// Throws std::invalid_argument when the image maps to the zero vector.
  FeatureVector embed(const Eigen::VectorXd& image) const;

 private:
  Extractor(std::string id, std::uint64_t seed, Eigen::MatrixXd map, double noise_sigma)
      : id_(std::move(id)), seed_(seed), map_(std::move(map)), noise_sigma_(noise_sigma) {}

  std::string id_;
  std::uint64_t seed_;
  Eigen::MatrixXd map_;
  double noise_sigma_;
};

FeatureVector sample_embedding(const Population& pop, std::size_t identity, const Extractor& extractor,
                               std::uint64_t sample_seed);

/// Throws on a dimension mismatch or a zero vector.
double cosine(const FeatureVector& u, const FeatureVector& v);

/// Smallest observed score tau with #{impostor >= tau} <= target_far * N.
/// Throws when fewer than 1 / target_far impostor scores are supplied.
double calibrate_threshold(std::span<const double> genuine_scores, std::span<const double> impostor_scores,
                           double target_far);

/// Largest t with #{impostor distance <= t} <= target_far * N.
int calibrate_distance_threshold(std::span<const std::size_t> impostor_distances, double target_far);

struct ScoreSet {
  std::vector<double> genuine_cosine;
  std::vector<double> impostor_cosine;
  std::vector<std::size_t> genuine_hamming;
  std::vector<std::size_t> impostor_hamming;
};

/// Genuine pairs compare sample seeds 0 and 1 of each identity; impostor pairs
/// are all cross-identity pairs of sample 0.
ScoreSet collect_scores(const Population& pop, const Extractor& extractor, const ProjectionMatrix& w);

struct OperatingPoint {
  double target_far = 0.0;
  double cosine_threshold = 0.0;
  int hamming_threshold = 0;
  /// Empirical rates of the calibrated thresholds on the calibration scores.
  double cosine_far = 0.0;
  double cosine_tpr = 0.0;
  double hamming_far = 0.0;
  double hamming_tpr = 0.0;
};

struct Thresholds {
  std::string extractor_id;
  std::size_t impostor_pairs = 0;
  std::size_t genuine_pairs = 0;
  OperatingPoint far1;   // 1.0%
  OperatingPoint far01;  // 0.1%

  double cosine_far1() const { return far1.cosine_threshold; }
  double cosine_far01() const { return far01.cosine_threshold; }
  int hamming_far1() const { return far1.hamming_threshold; }
  int hamming_far01() const { return far01.hamming_threshold; }
  const OperatingPoint& at(double far) const;
};

OperatingPoint calibrate_operating_point(const ScoreSet& scores, double target_far);
Thresholds calibrate(const ScoreSet& scores, std::string extractor_id);

nlohmann::json to_json(const Thresholds& t);
Thresholds thresholds_from_json(const nlohmann::json& j);

struct LabeledEmbedding {
  std::string identity;
  std::string sample;
  FeatureVector v;
};

/// CSV with header identity,sample,v0..v{d-1}; vectors are L2-normalized on load.
std::vector<LabeledEmbedding> load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, std::span<const LabeledEmbedding> rows);

}  // namespace fuzzvault
