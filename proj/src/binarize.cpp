#include "fuzzvault/binarize.hpp"

#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace fuzzvault {

ProjectionMatrix ProjectionMatrix::generate(std::uint64_t seed, std::size_t d_in, std::size_t n_out) {
  if (d_in == 0 || n_out == 0) throw std::invalid_argument("projection dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd entries(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(n_out));
  // Column-major fill: column j is the projection direction for bit j.
  for (Eigen::Index j = 0; j < entries.cols(); ++j) {
    for (Eigen::Index i = 0; i < entries.rows(); ++i) entries(i, j) = normal(rng);
  }
  return ProjectionMatrix(seed, std::move(entries));
}

BitVector binarize(const FeatureVector& v, const ProjectionMatrix& w) {
  if (static_cast<std::size_t>(v.size()) != w.d_in()) {
    throw std::invalid_argument(fmt::format("binarize: vector has {} entries, projection expects {}", v.size(), w.d_in()));
  }
  const Eigen::VectorXd projected = w.entries().transpose() * v;
  BitVector out(w.n_out());
  for (Eigen::Index j = 0; j < projected.size(); ++j) out.set(static_cast<std::size_t>(j), projected[j] >= 0.0);
  return out;
}

Eigen::VectorXd to_real(const BitVector& bits) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) out[static_cast<Eigen::Index>(i)] = bits.get(i) ? 1.0 : 0.0;
  return out;
}

}  // namespace fuzzvault
