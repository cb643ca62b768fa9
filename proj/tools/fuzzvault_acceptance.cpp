// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fuzzvault/experiment.hpp"
#include "fuzzvault/stats.hpp"

using namespace fuzzvault;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Runs {
  ExperimentConfig cfg;
  nlohmann::json report;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BitVector random_bits(std::size_t n, Rng& rng) {
  std::bernoulli_distribution bit(0.5);
  BitVector b(n);
  for (std::size_t i = 0; i < n; ++i) b.set(i, bit(rng));
  return b;
}

// 1. Bounded-distance BCH(15,7) decoding against brute-force nearest codeword.
Verdict ecc_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const BchCode code(4, 2);
  std::vector<std::uint32_t> codewords;
  for (std::uint32_t msg = 0; msg < (1U << code.k()); ++msg) {
    BitVector info(code.k());
    for (std::size_t i = 0; i < code.k(); ++i) info.set(i, (msg >> i) & 1U);
    const BitVector c = code.encode(info);
    std::uint32_t w = 0;
    for (std::size_t i = 0; i < 15; ++i) w |= static_cast<std::uint32_t>(c.get(i)) << i;
    codewords.push_back(w);
  }
  std::size_t agree = 0, decodable = 0;
  for (std::uint32_t r = 0; r < (1U << 15); ++r) {
    int best = 99;
    std::uint32_t nearest = 0;
    for (auto c : codewords) {
      const int d = __builtin_popcount(r ^ c);
      if (d < best) best = d, nearest = c;
    }
    BitVector word(15);
    for (std::size_t i = 0; i < 15; ++i) word.set(i, (r >> i) & 1U);
    const auto dec = code.decode(word);
    bool ok;
    if (best <= 2) {
      ++decodable;
      std::uint32_t got = 0;
      if (dec) {
        for (std::size_t i = 0; i < 15; ++i) got |= static_cast<std::uint32_t>(dec->get(i)) << i;
      }
      ok = dec && got == nearest;
    } else {
      ok = !dec;  // nothing within the designed radius
    }
    agree += ok;
  }
  const double secs = seconds_since(t0);
  return {agree == (1U << 15) && secs < 60.0,
          fmt::format("{}/32768 words agree ({} within radius 2), {:.2f}s", agree, decodable, secs)};
}

// 2. Completeness with wt(e) <= t and impostor acceptance against the target FAR.
Verdict completeness(const ExperimentConfig& cfg) {
  const auto world = build_world(cfg);
  const auto th = thresholds_from_json(read_json(cfg.out_dir / artifact::kThresholdsA));
  const SystemConfig sc = configure(th, cfg.far, world.projection_a.seed(), cfg.d, cfg.n_out, cfg.backend);
  const auto scheme = make_scheme(sc.backend, sc.n_out, sc.t);
  Rng rng(derive_seed(cfg.seed, "acceptance.completeness"));
  std::uniform_int_distribution<std::size_t> weight(0, sc.t);
  std::size_t exact = 0;
  const std::size_t trials = 10000;
  for (std::size_t i = 0; i < trials; ++i) {
    const BitVector b = random_bits(sc.n_out, rng);
    const auto rec = scheme->commit(b, rng);
    BitVector probe = b;
    std::vector<std::size_t> pos(sc.n_out);
    for (std::size_t k = 0; k < pos.size(); ++k) pos[k] = k;
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t k = 0, w = weight(rng); k < w; ++k) probe.flip(pos[k]);
    const auto r = scheme->recover(rec, probe);
    exact += r.accepted && r.b_hat == b;
  }
  // Impostors: enrollment templates of distinct fresh identities.
  const Population fresh = gen_population(derive_seed(cfg.seed, "acceptance.impostors"), 2000, cfg.d_latent);
  std::vector<BitVector> templates;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    templates.push_back(binarize(sample_embedding(fresh, i, world.extractor_a, 0), world.projection_a));
  }
  std::uniform_int_distribution<std::size_t> pick(0, fresh.size() - 1);
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    const auto rec = scheme->commit(templates[a], rng);
    accepted += scheme->recover(rec, templates[b]).accepted;
  }
  const Interval ci = wilson_interval(accepted, trials);
  return {exact == trials && ci.contains(cfg.far),
          fmt::format("genuine exact {}/{} (t={}); impostor FAR {:.4f}% CI [{:.4f}%, {:.4f}%] vs target {:.2f}% "
                      "(calibrated Hamming FAR {:.4f}%)",
                      exact, trials, sc.t, 100.0 * static_cast<double>(accepted) / trials, 100.0 * ci.lower,
                      100.0 * ci.upper, 100.0 * cfg.far, 100.0 * th.at(cfg.far).hamming_far)};
}

// 3. Every unlocked account's recovered template equals the enrolled one.
Verdict recovery_exact(const ExperimentConfig& cfg) {
  const auto world = build_world(cfg);
  const auto report = attack_report_from_json(read_json(cfg.out_dir / artifact::kAttack));
  std::size_t unlocked = 0, exact = 0;
  for (const auto& a : report.accounts) {
    if (!a.unlocked) continue;
    ++unlocked;
    const std::size_t i = std::stoul(a.user_id.substr(1));
    const BitVector truth =
        binarize(sample_embedding(world.users, i, world.extractor_a, cfg.enroll_sample), world.projection_a);
    exact += a.recovered_template == truth;
  }
  return {report.accounts.size() == cfg.users && unlocked > 0 && exact == unlocked,
          fmt::format("{} accounts, {} unlocked, {} bit-exact", report.accounts.size(), unlocked, exact)};
}

// 4. Per-entry hit probability and the unlock-rate aggregation. The p_i are
// measured on an independent guess set twice the size of the attack database so
// the prediction does not reuse the hits it is predicting.
Verdict guessing_statistics(const ExperimentConfig& cfg) {
  const auto s = read_json(cfg.out_dir / artifact::kAttack).at("summary");
  if (!s.contains("mean_hit_probability")) return {false, "attack was not exhaustive"};
  const auto trials = s.at("guess_trials").get<std::size_t>();
  const double p = s.at("mean_hit_probability").get<double>();
  const double unlock = s.at("unlock_rate").get<double>();

  const auto world = build_world(cfg);
  SystemConfig sc = system_config_from_json(read_json(cfg.out_dir / artifact::kSystem));
  sc.store_path = cfg.out_dir / artifact::kStore;
  const AuthSystem sys(sc);
  const std::size_t m = 2 * cfg.db_size;
  const Population probe = gen_population(derive_seed(cfg.seed, "acceptance.hit_probe"), m, cfg.d_latent);
  const GuessDatabase db = build_db(probe, world.extractor_a, world.projection_a);
  double predicted = 0.0, plug_in = 0.0, probe_p = 0.0;
  std::size_t accounts = 0;
  for (const auto& [id, rec] : sys.store().records()) {
    const std::size_t hits = guess_account(sys.scheme(), *rec.protected_record, db, false).hit_count;
    const double pi = static_cast<double>(hits) / static_cast<double>(m);
    predicted += unlock_probability_estimate(hits, m, cfg.db_size);
    plug_in += 1.0 - std::pow(1.0 - pi, static_cast<double>(cfg.db_size));
    probe_p += pi;
    ++accounts;
  }
  predicted /= static_cast<double>(accounts);
  plug_in /= static_cast<double>(accounts);
  probe_p /= static_cast<double>(accounts);
  const double rel = std::abs(p - cfg.far) / cfg.far;
  return {trials >= 100000 && rel <= 0.5 && std::abs(unlock - predicted) <= 0.03,
          fmt::format("{} trials, mean p = {:.5f} ({:+.1f}% vs {:.3f}); unlock {:.2f}% vs predicted {:.2f}% from "
                      "{} independent guesses per account (mean p {:.5f}; plug-in {:.2f}%, in-sample {:.2f}%)",
                      trials, p, 100.0 * (p - cfg.far) / cfg.far, cfg.far, 100.0 * unlock, 100.0 * predicted, m,
                      probe_p, 100.0 * plug_in, 100.0 * s.at("predicted_unlock_rate").get<double>())};
}

// 5. Unlock rate at 0.1% FAR with 300 users and |DB| = 5000.
Verdict unlock_magnitude(const ExperimentConfig& cfg) {
  const auto s = read_json(cfg.out_dir / artifact::kAttack).at("summary");
  const double unlock = s.at("unlock_rate").get<double>();
  return {cfg.users == 300 && cfg.db_size == 5000 && cfg.far == 0.001 && unlock >= 0.10,
          fmt::format("{}/{} unlocked = {:.2f}% ({:.0f}x the FAR); unprotected baseline {:.2f}%",
                      s.at("unlocked").get<std::size_t>(), s.at("accounts").get<std::size_t>(), 100.0 * unlock,
                      unlock / cfg.far, 100.0 * s.at("unprotected_unlock_rate").get<double>())};
}

// 6. Analytic vs finite-difference gradients of the combined loss at d = 8.
Verdict gradients() {
  const auto pop = gen_population(61, 12, 8);
  const auto ex = Extractor::generate("A", 62, 8, 8, 0.7);
  const auto w = ProjectionMatrix::generate(63, 8, 7);
  std::vector<FeatureVector> vs;
  for (std::size_t i = 0; i < pop.size(); ++i) vs.push_back(sample_embedding(pop, i, ex, 0));
  const PairSet p = make_pairs(vs, w);
  const FeatureCode code;
  const std::size_t fd[] = {8, 16, 16, 7}, gd[] = {7, 16, 16, 8};
  double worst = 0.0;
  for (double lambda : {0.85, 0.0}) {
    Mlp f = Mlp::create(fd, 64);
    Mlp g = Mlp::create(gd, 65);
    worst = std::max(worst, joint_gradient_check(f, g, code.encode(p.v), p.b, lambda, 1e-7));
  }
  return {worst < 1e-4, fmt::format("max relative error {:.3e} over both nets, lambda in {{0.85, 0}}", worst)};
}

// 7. Held-out inversion quality and training time.
Verdict inversion_quality(const ExperimentConfig& cfg) {
  const auto q = read_json(cfg.out_dir / artifact::kInversionQuality);
  const double frac = q.at("fraction_above_threshold").get<double>();
  const auto heldout = q.at("heldout_pairs").get<std::size_t>();
  const double secs = q.at("run_info").value("training_seconds", 1e9);
  return {cfg.train_pairs >= 20000 && heldout >= 2000 && frac >= 0.95 && secs < 1800.0,
          fmt::format("{} training pairs; {:.2f}% of {} held-out pairs above tau(0.1%) = {:.4f}; mean cosine {:.4f}; "
                      "training {:.0f}s",
                      cfg.train_pairs, 100.0 * frac, heldout, q.at("cosine_threshold_far01").get<double>(),
                      q.at("mean_cosine").get<double>(), secs)};
}

// 8. Cycle loss against the same run with lambda = 0.
Verdict cycle_benefit(const ExperimentConfig& cfg, const std::filesystem::path& base, const Logger& log) {
  ExperimentConfig zero = cfg;
  zero.train.lambda = 0.0;
  zero.out_dir = base / "lambda0";
  stage_gen_population(zero, log);
  stage_calibrate(zero, log);
  stage_train_inverter(zero, false, log);
  const double with = read_json(cfg.out_dir / artifact::kInversionQuality).at("mean_cosine").get<double>();
  const double without = read_json(zero.out_dir / artifact::kInversionQuality).at("mean_cosine").get<double>();
  return {with > without, fmt::format("held-out mean cosine {:.4f} with lambda = {} vs {:.4f} with lambda = 0 ({} epochs)",
                                      with, cfg.train.lambda, without, cfg.train.epochs)};
}

// 9. Scenario ordering and distance from the FAR.
Verdict scenarios(const ExperimentConfig& cfg) {
  const auto j = read_json(cfg.out_dir / artifact::kScenariosJson);
  auto rate = [&](const char* scenario, const char* space, double far) {
    for (const auto& r : j) {
      if (r.at("source") == "attack" && r.at("scenario") == scenario && r.at("space") == space &&
          std::abs(r.at("far_target").get<double>() - far) < 1e-12) {
        return r.at("success_rate").get<double>();
      }
    }
    throw std::runtime_error(fmt::format("missing {} {} {}", scenario, space, far));
  };
  bool ok = true;
  std::string detail;
  for (const char* space : {"feature", "binary"}) {
    for (const double far : kScenarioFars) {
      const double si = rate("SISFE", space, far), di = rate("DISFE", space, far);
      const double sd = rate("SIDFE", space, far), dd = rate("DIDFE", space, far);
      const bool order = si >= di && si >= sd && sd >= dd;
      const double low = std::min({si, di, sd, dd});
      ok = ok && order && low >= 10.0 * far;
      detail += fmt::format("{} {:.1f}%: {:.1f}/{:.1f}/{:.1f}/{:.1f}% (min {:.0f}x){}; ", space, 100.0 * far,
                            100.0 * si, 100.0 * di, 100.0 * sd, 100.0 * dd, low / far, order ? "" : " ORDER");
    }
  }
  detail += "order SISFE/DISFE/SIDFE/DIDFE";
  return {ok, detail};
}

// 10. Hamming-space TPR against cosine-space TPR at 1% FAR.
Verdict binarization_fidelity(const ExperimentConfig& cfg) {
  const auto th = thresholds_from_json(read_json(cfg.out_dir / artifact::kThresholdsA));
  const double gap = std::abs(th.far1.hamming_tpr - th.far1.cosine_tpr);
  return {gap <= 0.10, fmt::format("TPR at 1% FAR: cosine {:.2f}%, Hamming {:.2f}% (gap {:.2f} pp)",
                                   100.0 * th.far1.cosine_tpr, 100.0 * th.far1.hamming_tpr, 100.0 * gap)};
}

// 11. A second full run with the same config and seed.
Verdict determinism(const Runs& first, const std::filesystem::path& base, const Logger& log) {
  ExperimentConfig again = first.cfg;
  again.out_dir = base / "run2";
  const auto report = run_full_pipeline(again, false, log);
  bool same = strip_timestamps(report) == strip_timestamps(first.report);
  std::size_t files = 0;
  for (const char* name : {artifact::kAttack, artifact::kInverter, artifact::kLossHistory, artifact::kScenariosCsv,
                           artifact::kReconstructions, artifact::kGuessDb, artifact::kThresholdsA,
                           artifact::kThresholdsB}) {
    same = same && slurp(first.cfg.out_dir / name) == slurp(again.out_dir / name);
    ++files;
  }
  return {same, fmt::format("reports {} after removing timestamps; {} artifacts compared byte for byte",
                            same ? "identical" : "DIFFER", files)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for fuzzvault"};
  std::string config;
  std::string out = "acceptance_out";
  bool verbose = false;
  app.add_option("--config", config, "Experiment INI (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Scratch directory for the runs");
  app.add_flag("-v,--verbose", verbose, "Print stage progress");
  CLI11_PARSE(app, argc, argv);

  const Logger log{verbose ? std::function<void(const std::string&)>([](const std::string& m) { std::cerr << m << '\n'; })
                           : std::function<void(const std::string&)>{}};
  const std::filesystem::path base = out;
  std::filesystem::remove_all(base);

  std::vector<std::pair<std::string, std::function<Verdict()>>> checks;
  Runs first;
  try {
    first.cfg = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
    first.cfg.out_dir = base / "run1";
    first.report = run_full_pipeline(first.cfg, false, log);
  } catch (const std::exception& e) {
    std::cout << "FAIL pipeline: " << e.what() << '\n';
    return 1;
  }
  const auto& cfg = first.cfg;
  checks.emplace_back("1 ECC oracle equivalence", [] { return ecc_oracle(); });
  checks.emplace_back("2 Fuzzy-commitment completeness", [&] { return completeness(cfg); });
  checks.emplace_back("3 Template-recovery exactness", [&] { return recovery_exact(cfg); });
  checks.emplace_back("4 Guessing-attack statistics", [&] { return guessing_statistics(cfg); });
  checks.emplace_back("5 Unlock-rate order of magnitude", [&] { return unlock_magnitude(cfg); });
  checks.emplace_back("6 Gradient correctness", [] { return gradients(); });
  checks.emplace_back("7 Inversion quality", [&] { return inversion_quality(cfg); });
  checks.emplace_back("8 Cycle-loss benefit", [&] { return cycle_benefit(cfg, base, log); });
  checks.emplace_back("9 Scenario monotonicity", [&] { return scenarios(cfg); });
  checks.emplace_back("10 Binarization fidelity", [&] { return binarization_fidelity(cfg); });
  checks.emplace_back("11 Determinism", [&] { return determinism(first, base, log); });

  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, fmt::format("error: {}", e.what())};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", checks.size() - failed, checks.size()) << std::endl;
  return failed == 0 ? 0 : 1;
}
