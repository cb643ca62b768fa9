#include "fuzzvault/commitment.hpp"

#include <bit>
#include <charconv>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace fuzzvault {

Digest hash_codeword(const BitVector& c) {
  std::vector<std::uint8_t> buffer(kHashDomain.begin(), kHashDomain.end());
  const auto bytes = c.to_bytes();
  buffer.insert(buffer.end(), bytes.begin(), bytes.end());
  return sha256(buffer);
}

ProtectedRecord commit(const BchCode& code, const BitVector& b, Rng& rng) {
  if (b.size() != code.n()) {
    throw std::invalid_argument(fmt::format("commit: template has {} bits, code length is {}", b.size(), code.n()));
  }
  const BitVector c = code.random_codeword(rng);
  return ProtectedRecord{code.id(), b ^ c, hash_codeword(c)};
}

Recovery recover(const BchCode& code, const ProtectedRecord& record, const BitVector& b_prime) {
  if (b_prime.size() != code.n() || record.z.size() != code.n()) {
    throw std::invalid_argument(fmt::format("recover: expected {}-bit template and helper", code.n()));
  }
  const BitVector c_prime = b_prime ^ record.z;
  auto c_hat = code.decode(c_prime);
  if (!c_hat || hash_codeword(*c_hat) != record.tag) return Recovery{};
  BitVector b_hat = *c_hat ^ record.z;
  return Recovery{true, std::move(b_hat), std::move(c_hat)};
}

std::string_view to_string(SketchBackend backend) {
  return backend == SketchBackend::kBch ? "bch" : "pinsketch";
}

SketchBackend parse_backend(std::string_view name) {
  if (name == "bch") return SketchBackend::kBch;
  if (name == "pinsketch") return SketchBackend::kPinSketch;
  throw std::invalid_argument(fmt::format("unknown sketch backend '{}'", name));
}

ProtectedRecord CodeOffsetScheme::commit(const BitVector& b, Rng& rng) const {
  return fuzzvault::commit(code_, b, rng);
}

Recovery CodeOffsetScheme::recover(const ProtectedRecord& record, const BitVector& b_prime) const {
  return fuzzvault::recover(code_, record, b_prime);
}

namespace {

int field_degree_for(std::size_t template_bits) {
  int m = 3;
  while (m <= 16 && ((std::size_t{1} << m) - 1) < template_bits) ++m;
  if (m > 16) throw std::invalid_argument(fmt::format("no supported field covers {} bits", template_bits));
  return m;
}

std::vector<std::uint32_t> as_set(const BitVector& b) {
  std::vector<std::uint32_t> out;
  for (auto i : b.support()) out.push_back(static_cast<std::uint32_t>(i + 1));
  return out;
}

}  // namespace

PinSketchScheme::PinSketchScheme(std::size_t template_bits, std::size_t t)
    : bits_(template_bits), sketch_(field_degree_for(template_bits), t) {
  if (template_bits == 0) throw std::invalid_argument("PinSketch scheme needs a positive template length");
}

std::string PinSketchScheme::id() const {
  return fmt::format("pinsketch:m={}:t={}:n={}", sketch_.field().m(), sketch_.t(), bits_);
}

BitVector PinSketchScheme::pack(const PinSketchSketch& s) const {
  const auto m = static_cast<std::size_t>(sketch_.field().m());
  BitVector z(s.syndromes.size() * m);
  for (std::size_t j = 0; j < s.syndromes.size(); ++j) {
    for (std::size_t bit = 0; bit < m; ++bit) z.set(j * m + bit, (s.syndromes[j] >> bit) & 1U);
  }
  return z;
}

PinSketchSketch PinSketchScheme::unpack(const BitVector& z) const {
  const auto m = static_cast<std::size_t>(sketch_.field().m());
  if (z.size() != helper_bits()) throw std::invalid_argument("PinSketch helper has the wrong length");
  PinSketchSketch s{sketch_.t(), std::vector<GfElement>(sketch_.t(), 0)};
  for (std::size_t j = 0; j < s.t; ++j) {
    for (std::size_t bit = 0; bit < m; ++bit) {
      if (z.get(j * m + bit)) s.syndromes[j] |= GfElement{1} << bit;
    }
  }
  return s;
}

ProtectedRecord PinSketchScheme::commit(const BitVector& b, Rng& /*rng*/) const {
  if (b.size() != bits_) {
    throw std::invalid_argument(fmt::format("commit: template has {} bits, scheme expects {}", b.size(), bits_));
  }
  const auto set = as_set(b);
  return ProtectedRecord{id(), pack(sketch_.sketch(set)), hash_codeword(b)};
}

Recovery PinSketchScheme::recover(const ProtectedRecord& record, const BitVector& b_prime) const {
  if (b_prime.size() != bits_) {
    throw std::invalid_argument(fmt::format("recover: template has {} bits, scheme expects {}", b_prime.size(), bits_));
  }
  const auto diff = sketch_.recover(unpack(record.z), as_set(b_prime));
  if (!diff) return Recovery{};
  BitVector b_hat = b_prime;
  for (auto e : *diff) {
    if (e > bits_) return Recovery{};
    b_hat.flip(e - 1);
  }
  if (hash_codeword(b_hat) != record.tag) return Recovery{};
  return Recovery{true, std::move(b_hat), std::nullopt};
}

std::unique_ptr<CommitmentScheme> make_scheme(SketchBackend backend, std::size_t template_bits, std::size_t t) {
  if (backend == SketchBackend::kPinSketch) return std::make_unique<PinSketchScheme>(template_bits, t);
  const std::size_t next = template_bits + 1;
  if (!std::has_single_bit(next)) {
    throw std::invalid_argument(fmt::format("BCH backend needs 2^m - 1 template bits, got {}", template_bits));
  }
  return std::make_unique<CodeOffsetScheme>(BchCode(std::countr_zero(next), t));
}

std::unique_ptr<CommitmentScheme> scheme_from_id(std::string_view id) {
  const auto colon = id.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument(fmt::format("malformed code id '{}'", id));
  const std::string_view kind = id.substr(0, colon);
  std::map<std::string, std::size_t, std::less<>> params;
  std::string_view rest = id.substr(colon + 1);
  while (!rest.empty()) {
    const auto next = rest.find(':');
    const std::string_view item = rest.substr(0, next);
    const auto eq = item.find('=');
    std::size_t value = 0;
    if (eq == std::string_view::npos ||
        std::from_chars(item.data() + eq + 1, item.data() + item.size(), value).ec != std::errc{}) {
      throw std::invalid_argument(fmt::format("malformed code id '{}'", id));
    }
    params[std::string(item.substr(0, eq))] = value;
    rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);
  }
  auto need = [&](std::string_view key) {
    auto it = params.find(key);
    if (it == params.end()) throw std::invalid_argument(fmt::format("code id '{}' lacks '{}'", id, key));
    return it->second;
  };
  if (kind == "bch") return std::make_unique<CodeOffsetScheme>(BchCode(static_cast<int>(need("m")), need("t")));
  if (kind == "pinsketch") {
    auto scheme = std::make_unique<PinSketchScheme>(need("n"), need("t"));
    if (scheme->id() != id) throw std::invalid_argument(fmt::format("inconsistent code id '{}'", id));
    return scheme;
  }
  throw std::invalid_argument(fmt::format("unknown code kind in '{}'", id));
}

nlohmann::json to_json(const ProtectedRecord& record) {
  return {{"code_id", record.code_id}, {"z", record.z.to_hex()}, {"tag", to_hex(record.tag)}};
}

ProtectedRecord record_from_json(const nlohmann::json& j) {
  ProtectedRecord record;
  record.code_id = j.at("code_id").get<std::string>();
  const auto scheme = scheme_from_id(record.code_id);
  record.z = BitVector::from_hex(j.at("z").get<std::string>(), scheme->helper_bits());
  const auto tag = from_hex(j.at("tag").get<std::string>());
  if (tag.size() != record.tag.size()) throw std::invalid_argument("record tag must be 32 bytes");
  std::copy(tag.begin(), tag.end(), record.tag.begin());
  return record;
}

}  // namespace fuzzvault
