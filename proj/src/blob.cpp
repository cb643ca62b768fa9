#include "fuzzvault/blob.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "fuzzvault/hash.hpp"

namespace fuzzvault {

std::string encode_blob(const Eigen::MatrixXd& m) {
  static_assert(std::endian::native == std::endian::little);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(m.size()) * sizeof(double));
  std::size_t off = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      std::memcpy(bytes.data() + off, &v, sizeof v);
      off += sizeof v;
    }
  }
  return base64_encode(bytes);
}

Eigen::MatrixXd decode_blob(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
  const auto bytes = base64_decode(text);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
    throw std::invalid_argument(fmt::format("weight blob has {} bytes, expected {}x{} doubles", bytes.size(), rows, cols));
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t off = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v;
      std::memcpy(&v, bytes.data() + off, sizeof v);
      m(r, c) = v;
      off += sizeof v;
    }
  }
  return m;
}

}  // namespace fuzzvault
