#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace fuzzvault {

/// Base64 of the row-major float64 (little endian) entries of `m`.
std::string encode_blob(const Eigen::MatrixXd& m);
/// Throws std::invalid_argument when the blob size does not match rows x cols.
Eigen::MatrixXd decode_blob(std::string_view text, Eigen::Index rows, Eigen::Index cols);

}  // namespace fuzzvault
