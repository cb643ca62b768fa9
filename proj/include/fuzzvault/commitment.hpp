#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fuzzvault/bch.hpp"
#include "fuzzvault/bits.hpp"
#include "fuzzvault/hash.hpp"
#include "fuzzvault/pinsketch.hpp"

namespace fuzzvault {

inline constexpr std::string_view kHashDomain = "fuzzvault-v1:";

/// Stored protected template: helper string z and the hash tag.
struct ProtectedRecord {
  std::string code_id;
  BitVector z;
  Digest tag{};

  bool operator==(const ProtectedRecord&) const = default;
};

/// Outcome of presenting a fresh template against a record. `b_hat` is set
/// only when the hash tag verified; `c_hat` carries the decoded codeword when
/// the backend has one.
struct Recovery {
  bool accepted = false;
  std::optional<BitVector> b_hat;
  std::optional<BitVector> c_hat;
};

/// SHA-256(domain || packed bits of c).
Digest hash_codeword(const BitVector& c);

/// Code-offset fuzzy commitment: z = b xor c for a random codeword c.
ProtectedRecord commit(const BchCode& code, const BitVector& b, Rng& rng);
/// c' = b' xor z, decode to c-hat, accept iff the hash of c-hat matches.
Recovery recover(const BchCode& code, const ProtectedRecord& record, const BitVector& b_prime);

enum class SketchBackend { kBch, kPinSketch };

std::string_view to_string(SketchBackend backend);
SketchBackend parse_backend(std::string_view name);

/// A commitment construction bound to fixed parameters. Implementations are
/// immutable and safe to share between threads.
class CommitmentScheme {
 public:
  virtual ~CommitmentScheme() = default;

  virtual std::string id() const = 0;
  virtual SketchBackend backend() const = 0;
  virtual std::size_t template_bits() const = 0;
  /// Largest Hamming distance between enrolled and presented templates that
  /// is always accepted.
  virtual std::size_t capacity() const = 0;
  virtual std::size_t helper_bits() const = 0;

  virtual ProtectedRecord commit(const BitVector& b, Rng& rng) const = 0;
  virtual Recovery recover(const ProtectedRecord& record, const BitVector& b_prime) const = 0;
};

class CodeOffsetScheme final : public CommitmentScheme {
 public:
  explicit CodeOffsetScheme(BchCode code) : code_(std::move(code)) {}

  const BchCode& code() const { return code_; }

  std::string id() const override { return code_.id(); }
  SketchBackend backend() const override { return SketchBackend::kBch; }
  std::size_t template_bits() const override { return code_.n(); }
  std::size_t capacity() const override { return code_.t(); }
  std::size_t helper_bits() const override { return code_.n(); }
  ProtectedRecord commit(const BitVector& b, Rng& rng) const override;
  Recovery recover(const ProtectedRecord& record, const BitVector& b_prime) const override;

 private:
  BchCode code_;
};

/// Template bit j is set element j + 1; z packs the t odd syndromes, m bits
/// each, and the tag hashes the template itself.
class PinSketchScheme final : public CommitmentScheme {
 public:
  PinSketchScheme(std::size_t template_bits, std::size_t t);

  std::string id() const override;
  SketchBackend backend() const override { return SketchBackend::kPinSketch; }
  std::size_t template_bits() const override { return bits_; }
  std::size_t capacity() const override { return sketch_.t(); }
  std::size_t helper_bits() const override { return sketch_.t() * static_cast<std::size_t>(sketch_.field().m()); }
  ProtectedRecord commit(const BitVector& b, Rng& rng) const override;
  Recovery recover(const ProtectedRecord& record, const BitVector& b_prime) const override;

 private:
  BitVector pack(const PinSketchSketch& s) const;
  PinSketchSketch unpack(const BitVector& z) const;

  std::size_t bits_;
  PinSketch sketch_;
};

/// The BCH backend requires template_bits = 2^m - 1; PinSketch picks the
/// smallest field whose nonzero elements cover every bit position.
std::unique_ptr<CommitmentScheme> make_scheme(SketchBackend backend, std::size_t template_bits, std::size_t t);
std::unique_ptr<CommitmentScheme> scheme_from_id(std::string_view id);

nlohmann::json to_json(const ProtectedRecord& record);
/// Parses {code_id, z, tag}; the z length comes from the code id.
ProtectedRecord record_from_json(const nlohmann::json& j);

}  // namespace fuzzvault
