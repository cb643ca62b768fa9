#include "fuzzvault/authsys.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace fuzzvault {

std::string_view to_string(SystemMode mode) {
  return mode == SystemMode::kProtected ? "protected" : "unprotected";
}

SystemMode parse_mode(std::string_view name) {
  if (name == "protected") return SystemMode::kProtected;
  if (name == "unprotected") return SystemMode::kUnprotected;
  throw std::invalid_argument(fmt::format("unknown system mode '{}'", name));
}

void SystemConfig::validate() const {
  if (d == 0 || n_out == 0) throw std::invalid_argument("system config: zero dimension");
  if (hamming_threshold < 0 || static_cast<std::size_t>(hamming_threshold) != t) {
    throw std::invalid_argument(
        fmt::format("system config: code capacity t={} differs from Hamming threshold {}", t, hamming_threshold));
  }
  if (mode == SystemMode::kProtected) make_scheme(backend, n_out, t);
  if (!std::isfinite(cosine_threshold)) throw std::invalid_argument("system config: cosine threshold not finite");
}

SystemConfig configure(const Thresholds& thresholds, double far, std::uint64_t projection_seed, std::size_t d,
                       std::size_t n_out, SketchBackend backend) {
  const OperatingPoint& op = thresholds.at(far);
  SystemConfig c;
  c.extractor_id = thresholds.extractor_id;
  c.projection_seed = projection_seed;
  c.d = d;
  c.n_out = n_out;
  c.backend = backend;
  c.hamming_threshold = op.hamming_threshold;
  c.t = static_cast<std::size_t>(std::max(0, op.hamming_threshold));
  c.cosine_threshold = op.cosine_threshold;
  c.validate();
  return c;
}

nlohmann::json to_json(const SystemConfig& c) {
  return {{"extractor_id", c.extractor_id},
          {"projection_seed", c.projection_seed},
          {"d", c.d},
          {"n_out", c.n_out},
          {"backend", std::string(to_string(c.backend))},
          {"t", c.t},
          {"cosine_threshold", c.cosine_threshold},
          {"hamming_threshold", c.hamming_threshold},
          {"mode", std::string(to_string(c.mode))},
          {"store_path", c.store_path.string()}};
}

SystemConfig system_config_from_json(const nlohmann::json& j) {
  SystemConfig c;
  c.extractor_id = j.at("extractor_id").get<std::string>();
  c.projection_seed = j.at("projection_seed").get<std::uint64_t>();
  c.d = j.at("d").get<std::size_t>();
  c.n_out = j.at("n_out").get<std::size_t>();
  c.backend = parse_backend(j.at("backend").get<std::string>());
  c.t = j.at("t").get<std::size_t>();
  c.cosine_threshold = j.at("cosine_threshold").get<double>();
  c.hamming_threshold = j.at("hamming_threshold").get<int>();
  c.mode = parse_mode(j.value("mode", std::string("protected")));
  c.store_path = j.value("store_path", std::string());
  c.validate();
  return c;
}

nlohmann::json to_json(const EnrollmentRecord& r) {
  nlohmann::json j{{"user_id", r.user_id}, {"enrolled_at", r.enrolled_at}};
  if (r.protected_record) j["protected"] = to_json(*r.protected_record);
  if (r.unprotected_template) {
    j["unprotected_template"] = std::vector<double>(r.unprotected_template->begin(), r.unprotected_template->end());
  }
  return j;
}

EnrollmentRecord enrollment_from_json(const nlohmann::json& j) {
  EnrollmentRecord r;
  r.user_id = j.at("user_id").get<std::string>();
  r.enrolled_at = j.value("enrolled_at", std::string());
  if (j.contains("protected")) r.protected_record = record_from_json(j.at("protected"));
  if (j.contains("unprotected_template")) {
    const auto values = j.at("unprotected_template").get<std::vector<double>>();
    r.unprotected_template = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  if (r.protected_record.has_value() == r.unprotected_template.has_value()) {
    throw std::invalid_argument(fmt::format("enrollment '{}': exactly one template form expected", r.user_id));
  }
  return r;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

UserStore::UserStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      EnrollmentRecord r = enrollment_from_json(nlohmann::json::parse(line));
      const std::string id = r.user_id;
      if (!records_.emplace(id, std::move(r)).second) throw std::invalid_argument("duplicate user " + id);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path_.string(), line_no, e.what()));
    }
  }
}

const EnrollmentRecord& UserStore::get(const std::string& user_id) const {
  const auto it = records_.find(user_id);
  if (it == records_.end()) throw std::out_of_range(fmt::format("unknown user '{}'", user_id));
  return it->second;
}

void UserStore::add(EnrollmentRecord record) {
  if (contains(record.user_id)) throw std::invalid_argument(fmt::format("user '{}' already enrolled", record.user_id));
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + path_.string());
    out << to_json(record).dump() << '\n';
  }
  const std::string id = record.user_id;
  records_.emplace(id, std::move(record));
}

AuthSystem::AuthSystem(SystemConfig config, Clock clock)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      w_(ProjectionMatrix::generate(config_.projection_seed, config_.d, config_.n_out)),
      scheme_(make_scheme(config_.backend, config_.n_out, config_.t)),
      store_(config_.store_path) {
  config_.validate();
}

const EnrollmentRecord& AuthSystem::enroll(const std::string& user_id, const FeatureVector& v, Rng& rng) {
  if (static_cast<std::size_t>(v.size()) != config_.d) {
    throw std::invalid_argument(fmt::format("enroll: feature dimension {} != {}", v.size(), config_.d));
  }
  if (store_.contains(user_id)) throw std::invalid_argument(fmt::format("user '{}' already enrolled", user_id));
  EnrollmentRecord r;
  r.user_id = user_id;
  r.enrolled_at = clock_();
  if (config_.mode == SystemMode::kProtected) {
    r.protected_record = scheme_->commit(binarize(v, w_), rng);
  } else {
    r.unprotected_template = v;
  }
  store_.add(std::move(r));
  return store_.get(user_id);
}

AuthResult AuthSystem::authenticate(const std::string& user_id, const FeatureVector& v_probe) const {
  const EnrollmentRecord& r = store_.get(user_id);
  if (static_cast<std::size_t>(v_probe.size()) != config_.d) {
    throw std::invalid_argument(fmt::format("authenticate: feature dimension {} != {}", v_probe.size(), config_.d));
  }
  if (!v_probe.allFinite() || v_probe.norm() == 0.0) return {};
  if (r.unprotected_template) {
    return {cosine(*r.unprotected_template, v_probe) >= config_.cosine_threshold, std::nullopt};
  }
  Recovery rec = scheme_->recover(*r.protected_record, binarize(v_probe, w_));
  return {rec.accepted, std::move(rec.b_hat)};
}

namespace {

RateEstimate estimate(std::size_t errors, std::size_t trials) {
  return {trials, errors, static_cast<double>(errors) / static_cast<double>(trials), wilson_interval(errors, trials)};
}

}  // namespace

SystemRates measure_rates(const SystemConfig& config, const Population& pop, const Extractor& extractor,
                          std::size_t n_genuine, std::size_t n_impostor, double target_far, std::uint64_t seed) {
  if (pop.size() < 2) throw std::invalid_argument("measure_rates: need at least two identities");
  if (n_genuine == 0 || static_cast<double>(n_impostor) * target_far < 1.0) {
    throw std::invalid_argument(fmt::format(
        "measure_rates: {} impostor trials cannot resolve a FAR of {}; need at least {}", n_impostor, target_far,
        static_cast<std::size_t>(std::ceil(1.0 / target_far))));
  }
  const ProjectionMatrix w = ProjectionMatrix::generate(config.projection_seed, config.d, config.n_out);
  const auto scheme = make_scheme(config.backend, config.n_out, config.t);
  Rng rng(seed);
  const std::size_t n = pop.size();

  std::size_t prot_fr = 0, unprot_fr = 0;
  for (std::size_t trial = 0; trial < n_genuine; ++trial) {
    const std::size_t id = trial % n;
    const FeatureVector enrolled = sample_embedding(pop, id, extractor, 0);
    const FeatureVector probe = sample_embedding(pop, id, extractor, 1 + trial / n);
    const ProtectedRecord rec = scheme->commit(binarize(enrolled, w), rng);
    if (!scheme->recover(rec, binarize(probe, w)).accepted) ++prot_fr;
    if (cosine(enrolled, probe) < config.cosine_threshold) ++unprot_fr;
  }

  std::vector<FeatureVector> first(n);
  std::vector<BitVector> bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    first[i] = sample_embedding(pop, i, extractor, 0);
    bits[i] = binarize(first[i], w);
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t prot_fa = 0, unprot_fa = 0;
  for (std::size_t trial = 0; trial < n_impostor; ++trial) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    const ProtectedRecord rec = scheme->commit(bits[a], rng);
    if (scheme->recover(rec, bits[b]).accepted) ++prot_fa;
    if (cosine(first[a], first[b]) >= config.cosine_threshold) ++unprot_fa;
  }

  SystemRates out;
  out.protected_mode = {estimate(prot_fa, n_impostor), estimate(prot_fr, n_genuine)};
  out.unprotected_mode = {estimate(unprot_fa, n_impostor), estimate(unprot_fr, n_genuine)};
  return out;
}

}  // namespace fuzzvault
