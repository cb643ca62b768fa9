#include "fuzzvault/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "fuzzvault/blob.hpp"
#include "fuzzvault/stats.hpp"

namespace fuzzvault {

GuessDatabase build_db(std::span<const LabeledEmbedding> embeddings, const ProjectionMatrix& w,
                       std::string provenance) {
  if (embeddings.empty()) throw std::invalid_argument("build_db: no embeddings");
  GuessDatabase db;
  db.provenance = std::move(provenance);
  std::set<std::string> seen;
  std::vector<const FeatureVector*> kept;
  for (const auto& e : embeddings) {
    if (static_cast<std::size_t>(e.v.size()) != w.d_in()) {
      throw std::invalid_argument(fmt::format("build_db: embedding of '{}' has dimension {}, projection expects {}",
                                              e.identity, e.v.size(), w.d_in()));
    }
    if (!seen.insert(e.identity).second) continue;
    db.entries.push_back({e.identity, binarize(e.v, w)});
    kept.push_back(&e.v);
  }
  db.features.resize(static_cast<Eigen::Index>(w.d_in()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) db.features.col(static_cast<Eigen::Index>(i)) = *kept[i];
  return db;
}

GuessDatabase build_db(const Population& pop, const Extractor& extractor, const ProjectionMatrix& w) {
  if (pop.size() == 0) return {"empty", {}, Eigen::MatrixXd(static_cast<Eigen::Index>(w.d_in()), 0)};
  std::vector<LabeledEmbedding> rows;
  rows.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    rows.push_back({fmt::format("aux{}", i), "0", sample_embedding(pop, i, extractor, 0)});
  }
  return build_db(rows, w, fmt::format("extractor={} projection_seed={}", extractor.id(), w.seed()));
}

GuessOutcome guess_account(const CommitmentScheme& scheme, const ProtectedRecord& record, const GuessDatabase& db,
                           bool stop_at_first) {
  GuessOutcome out;
  for (std::size_t i = 0; i < db.size(); ++i) {
    ++out.guesses_tried;
    Recovery r = scheme.recover(record, db.entries[i].bits);
    if (!r.accepted) continue;
    ++out.hit_count;
    if (!out.unlocked) {
      out.unlocked = true;
      out.winning_entry = i;
      out.recovered_template = std::move(r.b_hat);
    }
    if (stop_at_first) break;
  }
  return out;
}

BitVector recover_template(const CommitmentScheme& scheme, const ProtectedRecord& record, const BitVector& b_prime) {
  Recovery r = scheme.recover(record, b_prime);
  if (!r.accepted) throw std::invalid_argument("recover_template: guess does not unlock the record");
  return std::move(*r.b_hat);
}

GuessOutcome guess_unprotected(const FeatureVector& enrolled, const GuessDatabase& db, double cosine_threshold,
                               bool stop_at_first) {
  if (db.features.cols() != static_cast<Eigen::Index>(db.size())) {
    throw std::invalid_argument("guess_unprotected: database has no feature vectors");
  }
  GuessOutcome out;
  const FeatureVector u = enrolled.normalized();
  for (std::size_t i = 0; i < db.size(); ++i) {
    ++out.guesses_tried;
    const auto col = db.features.col(static_cast<Eigen::Index>(i));
    if (u.dot(col) / col.norm() < cosine_threshold) continue;
    ++out.hit_count;
    if (!out.unlocked) {
      out.unlocked = true;
      out.winning_entry = i;
    }
    if (stop_at_first) break;
  }
  return out;
}

DispersionTest dispersion_test(std::span<const std::size_t> hits, std::size_t trials) {
  DispersionTest t;
  if (hits.empty() || trials == 0) return t;
  const double n = static_cast<double>(trials);
  const double k = static_cast<double>(hits.size());
  double sum = 0.0;
  for (auto h : hits) sum += static_cast<double>(h);
  t.mean = sum / (k * n);
  double ss = 0.0;
  for (auto h : hits) ss += std::pow(static_cast<double>(h) / n - t.mean, 2);
  t.variance = hits.size() > 1 ? ss / (k - 1) : 0.0;
  t.binomial_variance = t.mean * (1 - t.mean) / n;
  if (t.binomial_variance > 0 && hits.size() > 1) {
    t.statistic = ss / t.binomial_variance;
    t.p_value = chi_square_sf(t.statistic, k - 1);
  }
  return t;
}

HitStatistics hit_statistics(std::vector<std::size_t> hits, std::size_t db_size) {
  HitStatistics s;
  s.db_size = db_size;
  s.hits = std::move(hits);
  for (const std::size_t h : s.hits) {
    if (h > db_size) throw std::invalid_argument("hit_statistics: more hits than database entries");
    s.probabilities.push_back(db_size == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(db_size));
  }
  for (double p : s.probabilities) {
    const auto bin = static_cast<std::size_t>(std::floor(p / s.bin_width + 1e-9));
    if (bin >= s.bins.size()) s.bins.resize(bin + 1, 0);
    ++s.bins[bin];
  }
  s.dispersion = dispersion_test(s.hits, db_size);
  return s;
}

HitStatistics hit_histogram(const CommitmentScheme& scheme, std::span<const ProtectedRecord> records,
                            const GuessDatabase& db) {
  std::vector<std::size_t> hits;
  for (const auto& rec : records) hits.push_back(db.size() == 0 ? 0 : guess_account(scheme, rec, db, false).hit_count);
  return hit_statistics(std::move(hits), db.size());
}

HitStatistics hit_statistics(const AttackReport& report) {
  if (report.stop_at_first) throw std::invalid_argument("hit_statistics: report stopped at the first hit");
  std::vector<std::size_t> hits;
  for (const auto& a : report.accounts) hits.push_back(a.hit_count);
  return hit_statistics(std::move(hits), report.db_size);
}

nlohmann::json to_json(const GuessDatabase& db) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : db.entries) entries.push_back({{"label", e.label}, {"bits", e.bits.to_hex()}});
  return {{"format", "fuzzvault-guess-db-v1"},
          {"provenance", db.provenance},
          {"template_bits", db.template_bits()},
          {"d", db.features.rows()},
          {"features", encode_blob(db.features)},
          {"entries", std::move(entries)}};
}

GuessDatabase guess_database_from_json(const nlohmann::json& j) {
  if (j.at("format") != "fuzzvault-guess-db-v1") throw std::invalid_argument("guess db: unknown format");
  GuessDatabase db;
  db.provenance = j.at("provenance").get<std::string>();
  const auto n = j.at("template_bits").get<std::size_t>();
  for (const auto& e : j.at("entries")) {
    db.entries.push_back({e.at("label").get<std::string>(), BitVector::from_hex(e.at("bits").get<std::string>(), n)});
  }
  db.features = decode_blob(j.at("features").get<std::string>(), j.at("d").get<Eigen::Index>(),
                            static_cast<Eigen::Index>(db.entries.size()));
  return db;
}

double predicted_unlock_rate(std::span<const double> probabilities, std::size_t db_size) {
  if (probabilities.empty()) return 0.0;
  double sum = 0.0;
  for (double p : probabilities) sum += 1.0 - std::pow(1.0 - p, static_cast<double>(db_size));
  return sum / static_cast<double>(probabilities.size());
}

double unlock_probability_estimate(std::size_t hits, std::size_t trials, std::size_t db_size) {
  if (trials < db_size) throw std::invalid_argument("unlock_probability_estimate: fewer trials than database entries");
  if (hits > trials) throw std::invalid_argument("unlock_probability_estimate: more hits than trials");
  if (hits > trials - db_size) return 1.0;
  double miss = 1.0;
  for (std::size_t j = 0; j < hits; ++j) {
    miss *= static_cast<double>(trials - db_size - j) / static_cast<double>(trials - j);
  }
  return 1.0 - miss;
}

std::size_t AttackReport::unlocked() const {
  return static_cast<std::size_t>(std::count_if(accounts.begin(), accounts.end(), [](const auto& a) { return a.unlocked; }));
}

double AttackReport::unlock_rate() const {
  return accounts.empty() ? 0.0 : static_cast<double>(unlocked()) / static_cast<double>(accounts.size());
}

AttackReport run_attack(const CommitmentScheme& scheme, std::span<const TargetAccount> targets, const GuessDatabase& db,
                        bool stop_at_first) {
  AttackReport report;
  report.scheme_id = scheme.id();
  report.db_provenance = db.provenance;
  report.db_size = db.size();
  report.stop_at_first = stop_at_first;
  for (const auto& target : targets) {
    GuessOutcome g = guess_account(scheme, target.record, db, stop_at_first);
    AccountResult a;
    a.user_id = target.user_id;
    a.unlocked = g.unlocked;
    a.guesses_tried = g.guesses_tried;
    a.hit_count = g.hit_count;
    a.winning_entry = g.winning_entry;
    if (g.unlocked) {
      // Cross-check the winning guess through the recovery path.
      a.recovered_template = recover_template(scheme, target.record, db.entries[*g.winning_entry].bits);
      if (a.recovered_template != g.recovered_template) throw std::logic_error("run_attack: inconsistent recovery");
    }
    report.accounts.push_back(std::move(a));
  }
  return report;
}

nlohmann::json to_json(const AttackReport& report) {
  nlohmann::json accounts = nlohmann::json::array();
  for (const auto& a : report.accounts) {
    nlohmann::json j{{"user_id", a.user_id},
                     {"unlocked", a.unlocked},
                     {"guesses_tried", a.guesses_tried},
                     {"hit_count", a.hit_count}};
    j["winning_entry"] = a.winning_entry ? nlohmann::json(*a.winning_entry) : nlohmann::json(nullptr);
    j["recovered_template"] = a.recovered_template ? nlohmann::json(a.recovered_template->to_hex()) : nlohmann::json(nullptr);
    j["verified"] = a.unlocked;
    accounts.push_back(std::move(j));
  }
  return {{"scheme_id", report.scheme_id},
          {"db_provenance", report.db_provenance},
          {"db_size", report.db_size},
          {"stop_at_first", report.stop_at_first},
          {"accounts_attacked", report.accounts.size()},
          {"accounts_unlocked", report.unlocked()},
          {"unlock_rate", report.unlock_rate()},
          {"accounts", std::move(accounts)}};
}

AttackReport attack_report_from_json(const nlohmann::json& j) {
  AttackReport r;
  r.scheme_id = j.at("scheme_id").get<std::string>();
  r.db_provenance = j.value("db_provenance", std::string());
  r.db_size = j.at("db_size").get<std::size_t>();
  r.stop_at_first = j.value("stop_at_first", true);
  const auto scheme = scheme_from_id(r.scheme_id);
  for (const auto& a : j.at("accounts")) {
    AccountResult out;
    out.user_id = a.at("user_id").get<std::string>();
    out.unlocked = a.at("unlocked").get<bool>();
    out.guesses_tried = a.at("guesses_tried").get<std::size_t>();
    out.hit_count = a.at("hit_count").get<std::size_t>();
    if (!a.at("winning_entry").is_null()) out.winning_entry = a.at("winning_entry").get<std::size_t>();
    if (!a.at("recovered_template").is_null()) {
      out.recovered_template =
          BitVector::from_hex(a.at("recovered_template").get<std::string>(), scheme->template_bits());
    }
    r.accounts.push_back(std::move(out));
  }
  return r;
}

std::string to_csv(const AttackReport& report) {
  std::string out = "user_id,unlocked,guesses_tried,hit_count,winning_entry,recovered_template\n";
  for (const auto& a : report.accounts) {
    out += fmt::format("{},{},{},{},{},{}\n", a.user_id, a.unlocked ? 1 : 0, a.guesses_tried, a.hit_count,
                       a.winning_entry ? std::to_string(*a.winning_entry) : std::string(),
                       a.recovered_template ? a.recovered_template->to_hex() : std::string());
  }
  return out;
}

std::string histogram_csv(const HitStatistics& stats) {
  std::string out = "bin_lower,bin_upper,accounts\n";
  for (std::size_t k = 0; k < stats.bins.size(); ++k) {
    out += fmt::format("{:.4f},{:.4f},{}\n", static_cast<double>(k) * stats.bin_width,
                       static_cast<double>(k + 1) * stats.bin_width, stats.bins[k]);
  }
  return out;
}

}  // namespace fuzzvault
