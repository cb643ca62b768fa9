#include "fuzzvault/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fuzzvault {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd g(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
  return g;
}

std::size_t allowed_false_accepts(std::size_t n, double target_far) {
  if (n == 0) throw std::invalid_argument("calibration needs impostor scores");
  if (!(target_far > 0.0 && target_far < 1.0)) {
    throw std::invalid_argument(fmt::format("target FAR {} outside (0, 1)", target_far));
  }
  const auto k = static_cast<std::size_t>(std::floor(target_far * static_cast<double>(n) + 1e-9));
  if (k == 0) {
    throw std::invalid_argument(fmt::format("target FAR {} needs at least {} impostor scores, got {}", target_far,
                                            static_cast<std::size_t>(std::ceil(1.0 / target_far)), n));
  }
  return k;
}

}  // namespace

Population gen_population(std::uint64_t seed, std::size_t num_identities, std::size_t d_latent) {
  if (num_identities < 2) throw std::invalid_argument("population needs at least two identities");
  if (d_latent == 0) throw std::invalid_argument("latent dimension must be positive");
  std::mt19937_64 rng(seed);
  Population pop{seed, Eigen::MatrixXd(static_cast<Eigen::Index>(d_latent), static_cast<Eigen::Index>(num_identities))};
  for (Eigen::Index j = 0; j < pop.identities.cols(); ++j) {
    Eigen::VectorXd x = gaussian_vector(rng, d_latent);
    pop.identities.col(j) = x / x.norm();
  }
  return pop;
}

Eigen::VectorXd sample_image(const Population& pop, std::size_t identity, double sigma, std::uint64_t sample_seed) {
  if (identity >= pop.size()) {
    throw std::out_of_range(fmt::format("identity {} outside population of {}", identity, pop.size()));
  }
  Eigen::VectorXd image = pop.identities.col(static_cast<Eigen::Index>(identity));
  if (sigma == 0.0) return image;
  std::mt19937_64 rng(splitmix64(pop.seed ^ splitmix64(identity ^ splitmix64(sample_seed))));
  const double scale = sigma / std::sqrt(static_cast<double>(pop.d_latent()));
  image += scale * gaussian_vector(rng, pop.d_latent());
  return image;
}

Extractor Extractor::generate(std::string id, std::uint64_t seed, std::size_t d_latent, std::size_t d,
                              double noise_sigma) {
  if (d_latent == 0 || d == 0) throw std::invalid_argument("extractor dimensions must be positive");
  if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_latent)));
  Eigen::MatrixXd map(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d_latent));
  for (Eigen::Index j = 0; j < map.cols(); ++j) {
    for (Eigen::Index i = 0; i < map.rows(); ++i) map(i, j) = normal(rng);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[sv.size() - 1] < 1e-9 * sv[0]) {
    throw std::runtime_error(fmt::format("extractor '{}' map is numerically rank deficient", id));
  }
  return Extractor(std::move(id), seed, std::move(map), noise_sigma);
}

FeatureVector Extractor::embed(const Eigen::VectorXd& image) const {
  if (static_cast<std::size_t>(image.size()) != d_latent()) {
    throw std::invalid_argument(fmt::format("embed: image has {} entries, extractor expects {}", image.size(), d_latent()));
  }
  FeatureVector v = map_ * image;
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("embed: degenerate image");
  return v / norm;
}

FeatureVector sample_embedding(const Population& pop, std::size_t identity, const Extractor& extractor,
                               std::uint64_t sample_seed) {
  return extractor.embed(sample_image(pop, identity, extractor.noise_sigma(), sample_seed));
}

double cosine(const FeatureVector& u, const FeatureVector& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw std::invalid_argument("cosine: zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

double calibrate_threshold(std::span<const double> /*genuine_scores*/, std::span<const double> impostor_scores,
                           double target_far) {
  const std::size_t k = allowed_false_accepts(impostor_scores.size(), target_far);
  std::vector<double> s(impostor_scores.begin(), impostor_scores.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  if (k >= s.size()) return s.back();
  // count(>= s[p]) = p + 1 exactly when s[p] > s[p + 1].
  for (std::size_t p = k; p-- > 0;) {
    if (s[p] > s[p + 1]) return s[p];
  }
  return std::nextafter(s.front(), std::numeric_limits<double>::infinity());
}

int calibrate_distance_threshold(std::span<const std::size_t> impostor_distances, double target_far) {
  const std::size_t k = allowed_false_accepts(impostor_distances.size(), target_far);
  std::vector<std::size_t> d(impostor_distances.begin(), impostor_distances.end());
  if (k >= d.size()) return static_cast<int>(*std::max_element(d.begin(), d.end()));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  return static_cast<int>(d[k]) - 1;
}

ScoreSet collect_scores(const Population& pop, const Extractor& extractor, const ProjectionMatrix& w) {
  const std::size_t n = pop.size();
  Eigen::MatrixXd first(static_cast<Eigen::Index>(extractor.d()), static_cast<Eigen::Index>(n));
  std::vector<BitVector> bits_first;
  ScoreSet scores;
  bits_first.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector a = sample_embedding(pop, i, extractor, 0);
    const FeatureVector b = sample_embedding(pop, i, extractor, 1);
    first.col(static_cast<Eigen::Index>(i)) = a;
    bits_first.push_back(binarize(a, w));
    scores.genuine_cosine.push_back(a.dot(b));
    scores.genuine_hamming.push_back(hamming(bits_first.back(), binarize(b, w)));
  }
  const Eigen::MatrixXd gram = first.transpose() * first;
  scores.impostor_cosine.reserve(n * (n - 1) / 2);
  scores.impostor_hamming.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      scores.impostor_cosine.push_back(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      scores.impostor_hamming.push_back(hamming(bits_first[i], bits_first[j]));
    }
  }
  return scores;
}

OperatingPoint calibrate_operating_point(const ScoreSet& scores, double target_far) {
  OperatingPoint op;
  op.target_far = target_far;
  op.cosine_threshold = calibrate_threshold(scores.genuine_cosine, scores.impostor_cosine, target_far);
  op.hamming_threshold = calibrate_distance_threshold(scores.impostor_hamming, target_far);

  auto frac = [](const auto& values, auto pred) {
    if (values.empty()) return 0.0;
    return static_cast<double>(std::count_if(values.begin(), values.end(), pred)) /
           static_cast<double>(values.size());
  };
  const double tau = op.cosine_threshold;
  const auto t = static_cast<long long>(op.hamming_threshold);
  op.cosine_far = frac(scores.impostor_cosine, [&](double s) { return s >= tau; });
  op.cosine_tpr = frac(scores.genuine_cosine, [&](double s) { return s >= tau; });
  op.hamming_far = frac(scores.impostor_hamming, [&](std::size_t h) { return static_cast<long long>(h) <= t; });
  op.hamming_tpr = frac(scores.genuine_hamming, [&](std::size_t h) { return static_cast<long long>(h) <= t; });
  return op;
}

Thresholds calibrate(const ScoreSet& scores, std::string extractor_id) {
  Thresholds t;
  t.extractor_id = std::move(extractor_id);
  t.impostor_pairs = scores.impostor_cosine.size();
  t.genuine_pairs = scores.genuine_cosine.size();
  t.far1 = calibrate_operating_point(scores, 0.01);
  t.far01 = calibrate_operating_point(scores, 0.001);
  return t;
}

const OperatingPoint& Thresholds::at(double far) const {
  if (std::abs(far - 0.01) < 1e-12) return far1;
  if (std::abs(far - 0.001) < 1e-12) return far01;
  throw std::invalid_argument(fmt::format("no operating point calibrated for FAR {}", far));
}

namespace {

nlohmann::json point_json(const OperatingPoint& p) {
  return {{"target_far", p.target_far},   {"cosine_threshold", p.cosine_threshold},
          {"hamming_threshold", p.hamming_threshold}, {"cosine_far", p.cosine_far},
          {"cosine_tpr", p.cosine_tpr},   {"hamming_far", p.hamming_far},
          {"hamming_tpr", p.hamming_tpr}};
}

OperatingPoint point_from_json(const nlohmann::json& j) {
  OperatingPoint p;
  p.target_far = j.at("target_far").get<double>();
  p.cosine_threshold = j.at("cosine_threshold").get<double>();
  p.hamming_threshold = j.at("hamming_threshold").get<int>();
  p.cosine_far = j.at("cosine_far").get<double>();
  p.cosine_tpr = j.at("cosine_tpr").get<double>();
  p.hamming_far = j.at("hamming_far").get<double>();
  p.hamming_tpr = j.at("hamming_tpr").get<double>();
  return p;
}

}  // namespace

nlohmann::json to_json(const Thresholds& t) {
  return {{"extractor", t.extractor_id},
          {"impostor_pairs", t.impostor_pairs},
          {"genuine_pairs", t.genuine_pairs},
          {"cosine_far1", t.cosine_far1()},
          {"cosine_far01", t.cosine_far01()},
          {"hamming_far1", t.hamming_far1()},
          {"hamming_far01", t.hamming_far01()},
          {"far1", point_json(t.far1)},
          {"far01", point_json(t.far01)}};
}

Thresholds thresholds_from_json(const nlohmann::json& j) {
  Thresholds t;
  t.extractor_id = j.at("extractor").get<std::string>();
  t.impostor_pairs = j.at("impostor_pairs").get<std::size_t>();
  t.genuine_pairs = j.at("genuine_pairs").get<std::size_t>();
  t.far1 = point_from_json(j.at("far1"));
  t.far01 = point_from_json(j.at("far01"));
  return t;
}

std::vector<LabeledEmbedding> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open embeddings file {}", path.string()));
  std::vector<LabeledEmbedding> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) fields.push_back(field);
    if (line_no == 1) {
      if (fields.size() < 3 || fields[0] != "identity" || fields[1] != "sample") {
        throw std::runtime_error(fmt::format("{}:1: expected header identity,sample,v0,...", path.string()));
      }
      dim = fields.size() - 2;
      continue;
    }
    if (fields.size() != dim + 2) {
      throw std::runtime_error(fmt::format("{}:{}: expected {} values, found {}", path.string(), line_no, dim,
                                           fields.size() < 2 ? 0 : fields.size() - 2));
    }
    LabeledEmbedding row{fields[0], fields[1], FeatureVector(static_cast<Eigen::Index>(dim))};
    for (std::size_t i = 0; i < dim; ++i) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(fields[i + 2], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[i + 2].size() || !std::isfinite(value)) {
        throw std::runtime_error(fmt::format("{}:{}: malformed value '{}'", path.string(), line_no, fields[i + 2]));
      }
      row.v[static_cast<Eigen::Index>(i)] = value;
    }
    const double norm = row.v.norm();
    if (!(norm > 0.0)) throw std::runtime_error(fmt::format("{}:{}: zero feature vector", path.string(), line_no));
    row.v /= norm;
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_embeddings(const std::filesystem::path& path, std::span<const LabeledEmbedding> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write embeddings file {}", path.string()));
  const std::size_t dim = rows.empty() ? 0 : static_cast<std::size_t>(rows.front().v.size());
  out << "identity,sample";
  for (std::size_t i = 0; i < dim; ++i) out << ",v" << i;
  out << '\n';
  for (const auto& row : rows) {
    if (static_cast<std::size_t>(row.v.size()) != dim) throw std::invalid_argument("save_embeddings: ragged rows");
    out << row.identity << ',' << row.sample;
    for (Eigen::Index i = 0; i < row.v.size(); ++i) out << ',' << fmt::format("{:.17g}", row.v[i]);
    out << '\n';
  }
}

}  // namespace fuzzvault
