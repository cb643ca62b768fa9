#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "fuzzvault/bits.hpp"

namespace fuzzvault {

using FeatureVector = Eigen::VectorXd;

/// d_in x n_out matrix of i.i.d. standard normals, reproducible from its seed.
class ProjectionMatrix {
 public:
  static ProjectionMatrix generate(std::uint64_t seed, std::size_t d_in, std::size_t n_out);

  std::uint64_t seed() const { return seed_; }
  std::size_t d_in() const { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t n_out() const { return static_cast<std::size_t>(entries_.cols()); }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  ProjectionMatrix(std::uint64_t seed, Eigen::MatrixXd entries) : seed_(seed), entries_(std::move(entries)) {}

  std::uint64_t seed_;
  Eigen::MatrixXd entries_;
};

/// bit_j = 1 iff (W^T v)_j >= 0.
BitVector binarize(const FeatureVector& v, const ProjectionMatrix& w);

/// 0/1 bits as a real vector (network input form).
Eigen::VectorXd to_real(const BitVector& bits);

}  // namespace fuzzvault
