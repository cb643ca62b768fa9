#include "fuzzvault/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "fuzzvault/blob.hpp"
#include "fuzzvault/hash.hpp"

namespace fuzzvault {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"seed", "out"}},
      {"population", {"users", "calibration_identities", "db_size", "d_latent", "noise_sigma"}},
      {"system", {"d", "n_out", "backend", "far_percent"}},
      {"attack", {"stop_at_first"}},
      {"inversion",
       {"lambda", "learning_rate", "batch_size", "epochs", "patience", "bce_epsilon", "spread", "hidden", "train_pairs",
        "validation_pairs", "heldout_pairs"}},
      {"reconstruct", {"ridge_lambda", "map_samples"}},
      {"evaluate", {"enroll_sample", "other_sample"}},
  };
  return keys;
}

template <typename T>
void read_key(const pt::ptree& tree, const char* key, T& out) {
  const auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
  if (!node) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      const auto s = node->get_value<std::string>();
      if (s == "true" || s == "1") {
        out = true;
      } else if (s == "false" || s == "0") {
        out = false;
      } else {
        throw std::invalid_argument(s);
      }
    } else if constexpr (std::is_unsigned_v<T>) {
      const auto s = node->get_value<std::string>();
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(s);
      out = static_cast<T>(std::stoull(s));
    } else {
      out = node->get_value<T>();
    }
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("config: bad value '{}' for {}", node->get_value<std::string>(), key));
  }
}

std::string fmt_double(double x) { return fmt::format("{}", x); }

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  return in;
}

std::size_t identity_of(const std::string& user) {
  if (user.size() < 2 || user[0] != 'u' || user.find_first_not_of("0123456789", 1) != std::string::npos) {
    throw std::out_of_range(fmt::format("unknown user '{}'", user));
  }
  return static_cast<std::size_t>(std::stoull(user.substr(1)));
}

std::filesystem::path out_path(const ExperimentConfig& cfg, const char* name) { return cfg.out_dir / name; }

SystemConfig load_system(const ExperimentConfig& cfg) {
  SystemConfig sc = system_config_from_json(read_json(out_path(cfg, artifact::kSystem)));
  sc.store_path = out_path(cfg, artifact::kStore);
  return sc;
}

Thresholds load_thresholds(const ExperimentConfig& cfg, const char* name) {
  return thresholds_from_json(read_json(out_path(cfg, name)));
}

Population population(const ExperimentConfig& cfg, const char* label, std::size_t size) {
  return gen_population(cfg.sub_seed(label), size, cfg.d_latent);
}

PairSet pairs_of(const ExperimentConfig& cfg, const ExperimentWorld& world, const char* label, std::size_t size) {
  const Population pop = population(cfg, label, size);
  std::vector<FeatureVector> vs;
  vs.reserve(size);
  for (std::size_t i = 0; i < size; ++i) vs.push_back(sample_embedding(pop, i, world.extractor_a, 0));
  return make_pairs(vs, world.projection_a);
}

nlohmann::json inverter_settings(const ExperimentConfig& cfg, const ExperimentWorld& world) {
  const auto& t = cfg.train;
  return {{"seed", cfg.seed},
          {"d_latent", cfg.d_latent},
          {"noise_sigma", cfg.noise_sigma},
          {"d", cfg.d},
          {"n_out", cfg.n_out},
          {"extractor_seed", world.extractor_a.seed()},
          {"projection_seed", world.projection_a.seed()},
          {"hidden", cfg.hidden},
          {"train_pairs", cfg.train_pairs},
          {"validation_pairs", cfg.validation_pairs},
          {"lambda", t.lambda},
          {"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"patience", t.patience},
          {"bce_epsilon", t.bce_epsilon},
          {"spread", t.code.spread}};
}

nlohmann::json operating_point_json(const OperatingPoint& op) {
  return {{"target_far", op.target_far},   {"cosine_threshold", op.cosine_threshold},
          {"hamming_threshold", op.hamming_threshold}, {"cosine_far", op.cosine_far},
          {"cosine_tpr", op.cosine_tpr},   {"hamming_far", op.hamming_far},
          {"hamming_tpr", op.hamming_tpr}};
}

std::string iso_now() { return utc_timestamp(); }

}  // namespace

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* key, const std::string& why) {
    if (!ok) throw std::invalid_argument(fmt::format("config: {} {}", key, why));
  };
  require(users >= 2, "population.users", "must be at least 2");
  require(calibration_identities >= 2, "population.calibration_identities", "must be at least 2");
  require(d_latent > 0, "population.d_latent", "must be positive");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "population.noise_sigma", "must be finite and >= 0");
  require(d > 0, "system.d", "must be positive");
  require(n_out > 0, "system.n_out", "must be positive");
  require(far == 0.01 || far == 0.001, "system.far_percent", "must be 1.0 or 0.1");
  require(hidden > 0, "inversion.hidden", "must be positive");
  require(train_pairs > 0, "inversion.train_pairs", "must be positive");
  require(heldout_pairs > 0, "inversion.heldout_pairs", "must be positive");
  require(map_samples > 0, "reconstruct.map_samples", "must be positive");
  require(db_size != 1, "population.db_size", "must be 0 or at least 2");
  require(ridge_lambda >= 0.0 && std::isfinite(ridge_lambda), "reconstruct.ridge_lambda", "must be finite and >= 0");
  require(enroll_sample != other_sample, "evaluate.other_sample", "must differ from evaluate.enroll_sample");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(fmt::format("config: [inversion] {}", e.what()));
  }
}

std::uint64_t ExperimentConfig::sub_seed(std::string_view label) const { return derive_seed(seed, label); }

ExperimentConfig parse_experiment_config(std::string_view ini_text) {
  pt::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(fmt::format("config: line {}: {}", e.line(), e.message()));
  }
  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = keys.find(section);
    if (it == keys.end()) throw std::invalid_argument(fmt::format("config: unknown section [{}]", section));
    for (const auto& [key, _] : body) {
      if (!it->second.count(key)) throw std::invalid_argument(fmt::format("config: unknown key {}.{}", section, key));
    }
  }

  ExperimentConfig c;
  read_key(tree, "experiment.seed", c.seed);
  std::string out = c.out_dir.string();
  read_key(tree, "experiment.out", out);
  c.out_dir = out;
  read_key(tree, "population.users", c.users);
  read_key(tree, "population.calibration_identities", c.calibration_identities);
  read_key(tree, "population.db_size", c.db_size);
  read_key(tree, "population.d_latent", c.d_latent);
  read_key(tree, "population.noise_sigma", c.noise_sigma);
  read_key(tree, "system.d", c.d);
  read_key(tree, "system.n_out", c.n_out);
  std::string backend(to_string(c.backend));
  read_key(tree, "system.backend", backend);
  c.backend = parse_backend(backend);
  std::string far;
  read_key(tree, "system.far_percent", far);
  if (!far.empty()) c.far = parse_far_percent(far);
  read_key(tree, "attack.stop_at_first", c.stop_at_first);
  read_key(tree, "inversion.lambda", c.train.lambda);
  read_key(tree, "inversion.learning_rate", c.train.learning_rate);
  read_key(tree, "inversion.batch_size", c.train.batch_size);
  read_key(tree, "inversion.epochs", c.train.epochs);
  read_key(tree, "inversion.patience", c.train.patience);
  read_key(tree, "inversion.bce_epsilon", c.train.bce_epsilon);
  read_key(tree, "inversion.spread", c.train.code.spread);
  read_key(tree, "inversion.hidden", c.hidden);
  read_key(tree, "inversion.train_pairs", c.train_pairs);
  read_key(tree, "inversion.validation_pairs", c.validation_pairs);
  read_key(tree, "inversion.heldout_pairs", c.heldout_pairs);
  read_key(tree, "reconstruct.ridge_lambda", c.ridge_lambda);
  read_key(tree, "reconstruct.map_samples", c.map_samples);
  read_key(tree, "evaluate.enroll_sample", c.enroll_sample);
  read_key(tree, "evaluate.other_sample", c.other_sample);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
  std::string s;
  s += fmt::format("[experiment]\nseed = {}\nout = {}\n\n", c.seed, c.out_dir.string());
  s += fmt::format(
      "[population]\nusers = {}\ncalibration_identities = {}\ndb_size = {}\nd_latent = {}\nnoise_sigma = {}\n\n",
      c.users, c.calibration_identities, c.db_size, c.d_latent, fmt_double(c.noise_sigma));
  s += fmt::format("[system]\nd = {}\nn_out = {}\nbackend = {}\nfar_percent = {}\n\n", c.d, c.n_out,
                   to_string(c.backend), c.far == 0.01 ? "1.0" : "0.1");
  s += fmt::format("[attack]\nstop_at_first = {}\n\n", c.stop_at_first ? "true" : "false");
  s += fmt::format(
      "[inversion]\nlambda = {}\nlearning_rate = {}\nbatch_size = {}\nepochs = {}\npatience = {}\nbce_epsilon = {}\n"
      "spread = {}\nhidden = {}\ntrain_pairs = {}\nvalidation_pairs = {}\nheldout_pairs = {}\n\n",
      fmt_double(c.train.lambda), fmt_double(c.train.learning_rate), c.train.batch_size, c.train.epochs,
      c.train.patience, fmt_double(c.train.bce_epsilon), fmt_double(c.train.code.spread), c.hidden, c.train_pairs,
      c.validation_pairs, c.heldout_pairs);
  s += fmt::format("[reconstruct]\nridge_lambda = {}\nmap_samples = {}\n\n", fmt_double(c.ridge_lambda),
                   c.map_samples);
  s += fmt::format("[evaluate]\nenroll_sample = {}\nother_sample = {}\n", c.enroll_sample, c.other_sample);
  return s;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  // The output directory is where artifacts go, not what they contain.
  return {{"seed", c.seed},
          {"population",
           {{"users", c.users},
            {"calibration_identities", c.calibration_identities},
            {"db_size", c.db_size},
            {"d_latent", c.d_latent},
            {"noise_sigma", c.noise_sigma}}},
          {"system", {{"d", c.d}, {"n_out", c.n_out}, {"backend", std::string(to_string(c.backend))}, {"far", c.far}}},
          {"attack", {{"stop_at_first", c.stop_at_first}}},
          {"inversion",
           {{"lambda", c.train.lambda},
            {"learning_rate", c.train.learning_rate},
            {"batch_size", c.train.batch_size},
            {"epochs", c.train.epochs},
            {"patience", c.train.patience},
            {"bce_epsilon", c.train.bce_epsilon},
            {"spread", c.train.code.spread},
            {"hidden", c.hidden},
            {"train_pairs", c.train_pairs},
            {"validation_pairs", c.validation_pairs},
            {"heldout_pairs", c.heldout_pairs}}},
          {"reconstruct", {{"ridge_lambda", c.ridge_lambda}, {"map_samples", c.map_samples}}},
          {"evaluate", {{"enroll_sample", c.enroll_sample}, {"other_sample", c.other_sample}}}};
}

double parse_far_percent(std::string_view text) {
  double pct = 0.0;
  try {
    std::size_t used = 0;
    pct = std::stod(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("FAR '{}' is not a number", text));
  }
  if (std::abs(pct - 1.0) < 1e-12) return 0.01;
  if (std::abs(pct - 0.1) < 1e-12) return 0.001;
  throw std::invalid_argument(fmt::format("FAR must be 1.0 or 0.1 (percent), got {}", text));
}

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", stage, what)), stage_(std::move(stage)) {}

ExperimentWorld build_world(const ExperimentConfig& cfg) {
  return {population(cfg, "population.calibration", cfg.calibration_identities),
          population(cfg, "population.users", cfg.users),
          cfg.db_size == 0 ? Population{cfg.sub_seed("population.aux"), Eigen::MatrixXd(cfg.d_latent, 0)}
                           : population(cfg, "population.aux", cfg.db_size),
          Extractor::generate("A", cfg.sub_seed("extractor.A"), cfg.d_latent, cfg.d, cfg.noise_sigma),
          Extractor::generate("B", cfg.sub_seed("extractor.B"), cfg.d_latent, cfg.d, cfg.noise_sigma),
          ProjectionMatrix::generate(cfg.sub_seed("projection.A"), cfg.d, cfg.n_out),
          ProjectionMatrix::generate(cfg.sub_seed("projection.B"), cfg.d, cfg.n_out)};
}

std::string user_id(std::size_t identity) { return fmt::format("u{:03}", identity); }

void stage_gen_population(const ExperimentConfig& cfg, const Logger& log) {
  std::filesystem::create_directories(cfg.out_dir);
  write_text(out_path(cfg, artifact::kConfig), to_ini(cfg));
  const auto world = build_world(cfg);
  auto pop_json = [](const Population& p) {
    return nlohmann::json{{"seed", p.seed}, {"size", p.size()}, {"d_latent", p.d_latent()}};
  };
  auto ex_json = [](const Extractor& e) {
    return nlohmann::json{{"id", e.id()}, {"seed", e.seed()}, {"d", e.d()}, {"noise_sigma", e.noise_sigma()}};
  };
  nlohmann::json j{
      {"format", "fuzzvault-population-v1"},
      {"populations",
       {{"calibration", pop_json(world.calibration)},
        {"users", pop_json(world.users)},
        {"aux", pop_json(world.aux)},
        {"train", {{"seed", cfg.sub_seed("population.train")}, {"size", cfg.train_pairs}}},
        {"validation", {{"seed", cfg.sub_seed("population.validation")}, {"size", cfg.validation_pairs}}},
        {"heldout", {{"seed", cfg.sub_seed("population.heldout")}, {"size", cfg.heldout_pairs}}}}},
      {"extractors", {ex_json(world.extractor_a), ex_json(world.extractor_b)}},
      {"projections",
       {{{"system", "A"}, {"seed", world.projection_a.seed()}, {"n_out", cfg.n_out}},
        {{"system", "B"}, {"seed", world.projection_b.seed()}, {"n_out", cfg.n_out}}}}};
  write_json(out_path(cfg, artifact::kPopulation), j);

  std::vector<LabeledEmbedding> rows;
  for (std::size_t i = 0; i < world.users.size(); ++i) {
    rows.push_back({user_id(i), std::to_string(cfg.enroll_sample),
                    sample_embedding(world.users, i, world.extractor_a, cfg.enroll_sample)});
  }
  save_embeddings(out_path(cfg, artifact::kUserEmbeddings), rows);
  log(fmt::format("population: {} users, {} calibration, {} auxiliary identities", cfg.users,
                  cfg.calibration_identities, cfg.db_size));
}

void stage_calibrate(const ExperimentConfig& cfg, const Logger& log) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto world = build_world(cfg);
  for (const auto& [ex, w, name] : {std::tuple{&world.extractor_a, &world.projection_a, artifact::kThresholdsA},
                                    std::tuple{&world.extractor_b, &world.projection_b, artifact::kThresholdsB}}) {
    const auto th = calibrate(collect_scores(world.calibration, *ex, *w), ex->id());
    write_json(out_path(cfg, name), to_json(th));
    log(fmt::format("calibrate {}: 1.0% tau={:.4f} t={}  0.1% tau={:.4f} t={}", ex->id(), th.far1.cosine_threshold,
                    th.far1.hamming_threshold, th.far01.cosine_threshold, th.far01.hamming_threshold));
  }
}

void stage_enroll(const ExperimentConfig& cfg, const Logger& log) {
  const auto world = build_world(cfg);
  const auto th = load_thresholds(cfg, artifact::kThresholdsA);
  SystemConfig sc = configure(th, cfg.far, world.projection_a.seed(), cfg.d, cfg.n_out, cfg.backend);
  sc.store_path = out_path(cfg, artifact::kStore);
  std::filesystem::remove(sc.store_path);
  nlohmann::json sj = to_json(sc);
  sj["store_path"] = artifact::kStore;
  write_json(out_path(cfg, artifact::kSystem), sj);
  AuthSystem sys(sc);
  Rng rng(cfg.sub_seed("enroll"));
  for (std::size_t i = 0; i < world.users.size(); ++i) {
    sys.enroll(user_id(i), sample_embedding(world.users, i, world.extractor_a, cfg.enroll_sample), rng);
  }
  log(fmt::format("enroll: {} users under {} (t={})", sys.store().size(), sys.scheme().id(), sc.t));
}

void stage_build_db(const ExperimentConfig& cfg, const Logger& log) {
  const auto world = build_world(cfg);
  GuessDatabase db = build_db(world.aux, world.extractor_a, world.projection_a);
  db.provenance = fmt::format("synthetic auxiliary population seed={} size={}", world.aux.seed, world.aux.size());
  write_json(out_path(cfg, artifact::kGuessDb), to_json(db));
  log(fmt::format("build-db: {} entries", db.size()));
}

void stage_attack(const ExperimentConfig& cfg, const Logger& log) {
  const auto world = build_world(cfg);
  const SystemConfig sc = load_system(cfg);
  const AuthSystem sys(sc);
  const GuessDatabase db = guess_database_from_json(read_json(out_path(cfg, artifact::kGuessDb)));
  std::vector<TargetAccount> targets;
  for (const auto& [id, rec] : sys.store().records()) {
    if (!rec.protected_record) throw std::invalid_argument(fmt::format("attack: {} has no protected record", id));
    targets.push_back({id, *rec.protected_record});
  }
  const AttackReport report = run_attack(sys.scheme(), targets, db, cfg.stop_at_first);

  // Simulation-side checks: recovered templates against the true ones, and
  // the same guessing attack against unprotected cosine templates.
  const Thresholds th = load_thresholds(cfg, artifact::kThresholdsA);
  std::size_t exact = 0;
  std::size_t unprotected_unlocked = 0;
  for (const auto& acc : report.accounts) {
    const std::size_t i = identity_of(acc.user_id);
    const FeatureVector v = sample_embedding(world.users, i, world.extractor_a, cfg.enroll_sample);
    if (acc.unlocked && acc.recovered_template == binarize(v, sys.projection())) ++exact;
    unprotected_unlocked += guess_unprotected(v, db, th.at(cfg.far).cosine_threshold, true).unlocked;
  }
  nlohmann::json summary{{"accounts", report.accounts.size()},
                         {"unlocked", report.unlocked()},
                         {"unlock_rate", report.unlock_rate()},
                         {"exact_recoveries", exact},
                         {"all_recoveries_exact", exact == report.unlocked()},
                         {"operating_far", cfg.far},
                         {"calibrated_hamming_far", th.at(cfg.far).hamming_far},
                         {"unprotected_unlock_rate",
                          report.accounts.empty() ? 0.0
                                                  : static_cast<double>(unprotected_unlocked) /
                                                        static_cast<double>(report.accounts.size())}};
  if (!report.stop_at_first) {
    const HitStatistics stats = hit_statistics(report);
    summary["guess_trials"] = report.accounts.size() * report.db_size;
    summary["mean_hit_probability"] = stats.mean();
    summary["predicted_unlock_rate"] = predicted_unlock_rate(stats.probabilities, report.db_size);
    summary["dispersion"] = {{"variance", stats.dispersion.variance},
                             {"binomial_variance", stats.dispersion.binomial_variance},
                             {"statistic", stats.dispersion.statistic},
                             {"p_value", stats.dispersion.p_value}};
    write_text(out_path(cfg, artifact::kHistogram), histogram_csv(stats));
  }
  nlohmann::json j = to_json(report);
  j["summary"] = summary;
  write_json(out_path(cfg, artifact::kAttack), j);
  write_text(out_path(cfg, artifact::kAttackCsv), to_csv(report));
  log(fmt::format("attack: {}/{} accounts unlocked ({:.1f}%), {} exact recoveries", report.unlocked(),
                  report.accounts.size(), 100.0 * report.unlock_rate(), exact));
  if (exact != report.unlocked()) throw std::logic_error("attack: a recovered template differs from the enrolled one");
}

bool stage_train_inverter(const ExperimentConfig& cfg, bool resume, const Logger& log) {
  const auto world = build_world(cfg);
  const auto settings = inverter_settings(cfg, world);
  const auto inverter_path = out_path(cfg, artifact::kInverter);
  const auto quality_path = out_path(cfg, artifact::kInversionQuality);
  const Thresholds th = load_thresholds(cfg, artifact::kThresholdsA);

  std::optional<InverterBundle> bundle;
  nlohmann::json run_info;
  if (resume && std::filesystem::exists(inverter_path) && std::filesystem::exists(quality_path)) {
    const auto old = read_json(quality_path);
    if (old.value("settings", nlohmann::json()) == settings) {
      bundle = load_inverter(inverter_path);
      run_info = old.value("run_info", nlohmann::json::object());
      run_info["resumed"] = true;
      log("train-inverter: reusing cached model");
    } else {
      log("train-inverter: cached model was trained with other settings; retraining");
    }
  }

  const PairSet heldout = pairs_of(cfg, world, "population.heldout", cfg.heldout_pairs);
  nlohmann::json training;
  const bool trained = !bundle;
  if (trained) {
    const PairSet data = pairs_of(cfg, world, "population.train", cfg.train_pairs);
    const PairSet validation = cfg.validation_pairs
                                   ? pairs_of(cfg, world, "population.validation", cfg.validation_pairs)
                                   : PairSet{};
    const std::size_t f_dims[] = {cfg.d, cfg.hidden, cfg.hidden, cfg.n_out};
    const std::size_t g_dims[] = {cfg.n_out, cfg.hidden, cfg.hidden, cfg.d};
    Mlp f = Mlp::create(f_dims, cfg.sub_seed("inverter.F"));
    Mlp g = Mlp::create(g_dims, cfg.sub_seed("inverter.G"));
    Rng rng(cfg.sub_seed("inverter.shuffle"));
    const std::string started = iso_now();
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult result = train(f, g, data, validation, cfg.train, rng, [&](const EpochRecord& e) {
      if (e.epoch == 1 || e.epoch % 10 == 0) {
        log(fmt::format("train-inverter: epoch {} L_F={:.4f} L_G={:.5f} val cos={:.4f}", e.epoch, e.train.f_total,
                        e.train.g_total, e.val_cosine));
      }
    });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run_info = {{"started_at", started}, {"finished_at", iso_now()}, {"training_seconds", seconds},
                {"resumed", false}};
    bundle = InverterBundle{std::move(f), std::move(g), cfg.train, world.projection_a.seed()};
    save_inverter(inverter_path, *bundle);
    write_text(out_path(cfg, artifact::kLossHistory), loss_history_csv(result));
    training = {{"epochs_run", result.history.size()}, {"early_stopped", result.early_stopped}};
  } else {
    const auto old = read_json(quality_path);
    training = old.at("training");
  }

  const double tau = th.far01.cosine_threshold;
  const InversionQuality q = evaluate_inversion(bundle->f, bundle->g, heldout, world.projection_a, cfg.train.code, tau);
  const nlohmann::json j{{"settings", settings},
                         {"training", training},
                         {"heldout_pairs", heldout.size()},
                         {"cosine_threshold_far01", tau},
                         {"mean_cosine", q.mean_cosine},
                         {"fraction_above_threshold", q.fraction_above},
                         {"f_bit_agreement", q.f_bit_agreement},
                         {"cycle_cosine", q.cycle_cosine},
                         {"median_rebinarized_hamming", q.median_rebinarized_hamming},
                         {"run_info", run_info}};
  write_json(quality_path, j);
  log(fmt::format("train-inverter: held-out mean cosine {:.4f}, {:.2f}% above tau(0.1%)={:.4f}", q.mean_cosine,
                  100.0 * q.fraction_above, tau));
  return trained;
}

void stage_reconstruct(const ExperimentConfig& cfg, const Logger& log) {
  const auto world = build_world(cfg);
  const InverterBundle bundle = load_inverter(out_path(cfg, artifact::kInverter));
  if (bundle.projection_seed != world.projection_a.seed()) {
    throw std::invalid_argument("reconstruct: inverter was trained for another binarization");
  }
  const AttackReport report = attack_report_from_json(read_json(out_path(cfg, artifact::kAttack)));
  const AuxPairs aux = make_aux_pairs(world.aux, world.extractor_a, cfg.map_samples);
  const InverseMap map = fit_inverse_map(aux.latents, aux.embeddings, cfg.ridge_lambda);
  write_json(out_path(cfg, artifact::kInverseMap), to_json(map));

  const auto n = static_cast<Eigen::Index>(report.accounts.size());
  Eigen::MatrixXd attack(cfg.d_latent, n), original(cfg.d_latent, n);
  nlohmann::json accounts = nlohmann::json::array();
  double cos_sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& acc = report.accounts[static_cast<std::size_t>(k)];
    const std::size_t i = identity_of(acc.user_id);
    const FeatureVector v = sample_embedding(world.users, i, world.extractor_a, cfg.enroll_sample);
    const BitVector enrolled = binarize(v, world.projection_a);
    // Reconstruction-stage rates cover every account; unlocked accounts use
    // the template the attack recovered, the rest the enrolled one.
    if (acc.unlocked && acc.recovered_template != enrolled) {
      throw std::logic_error(fmt::format("reconstruct: recovered template of {} is not exact", acc.user_id));
    }
    const BitVector& b = acc.unlocked ? *acc.recovered_template : enrolled;
    const FeatureVector v_hat = invert(bundle.g, b, bundle.config.code);
    attack.col(k) = reconstruct(map, v_hat);
    original.col(k) = reconstruct(map, v);
    const double c = cosine(v_hat, v);
    cos_sum += c;
    accounts.push_back({{"user_id", acc.user_id},
                        {"identity", i},
                        {"unlocked", acc.unlocked},
                        {"template_source", acc.unlocked ? "recovered" : "enrolled"},
                        {"template", b.to_hex()},
                        {"feature_cosine", c}});
  }
  const nlohmann::json j{{"format", "fuzzvault-reconstructions-v1"},
                         {"d_latent", cfg.d_latent},
                         {"ridge_lambda", map.ridge_lambda},
                         {"fit_residual", map.fit_residual},
                         {"accounts", accounts},
                         {"attack_latents", encode_blob(attack)},
                         {"original_latents", encode_blob(original)}};
  write_json(out_path(cfg, artifact::kReconstructions), j);
  log(fmt::format("reconstruct: {} accounts, mean cos(G(b), v) {:.4f}, map residual {:.4f}", n,
                  n ? cos_sum / static_cast<double>(n) : 0.0, map.fit_residual));
}

void stage_evaluate(const ExperimentConfig& cfg, const Logger& log) {
  const auto world = build_world(cfg);
  const auto rec = read_json(out_path(cfg, artifact::kReconstructions));
  const auto n = static_cast<Eigen::Index>(rec.at("accounts").size());
  const auto dl = rec.at("d_latent").get<Eigen::Index>();
  const Eigen::MatrixXd attack = decode_blob(rec.at("attack_latents").get<std::string>(), dl, n);
  const Eigen::MatrixXd original = decode_blob(rec.at("original_latents").get<std::string>(), dl, n);
  std::vector<ScenarioAccount> accounts;
  std::vector<Eigen::VectorXd> attack_latents, original_latents;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& a = rec.at("accounts")[static_cast<std::size_t>(k)];
    accounts.push_back({a.at("identity").get<std::size_t>(), a.at("unlocked").get<bool>()});
    attack_latents.emplace_back(attack.col(k));
    original_latents.emplace_back(original.col(k));
  }
  const VerifierSystem a{world.extractor_a, world.projection_a, load_thresholds(cfg, artifact::kThresholdsA)};
  const VerifierSystem b{world.extractor_b, world.projection_b, load_thresholds(cfg, artifact::kThresholdsB)};
  const auto results = evaluate_scenarios(a, b, world.users, accounts, attack_latents, original_latents,
                                          {cfg.enroll_sample, cfg.other_sample});
  write_text(out_path(cfg, artifact::kScenariosCsv), scenario_csv(results));
  write_text(out_path(cfg, artifact::kScenariosMd), scenario_markdown(results));
  write_json(out_path(cfg, artifact::kScenariosJson), to_json(results));
  for (const auto s : kScenarios) {
    const auto& r1 = find_result(results, ProbeSource::kAttack, s, MatchSpace::kFeature, 0.01);
    const auto& r01 = find_result(results, ProbeSource::kAttack, s, MatchSpace::kFeature, 0.001);
    log(fmt::format("evaluate {}: feature space {:.1f}% at 1.0% FAR, {:.1f}% at 0.1% FAR", to_string(s),
                    100.0 * r1.success_rate, 100.0 * r01.success_rate));
  }
}

nlohmann::json stage_report(const ExperimentConfig& cfg, const Logger& log) {
  const auto th_a = read_json(out_path(cfg, artifact::kThresholdsA));
  const auto th_b = read_json(out_path(cfg, artifact::kThresholdsB));
  const auto attack = read_json(out_path(cfg, artifact::kAttack));
  const auto quality = read_json(out_path(cfg, artifact::kInversionQuality));
  const auto rec = read_json(out_path(cfg, artifact::kReconstructions));
  const auto scenarios = read_json(out_path(cfg, artifact::kScenariosJson));
  const Thresholds ta = thresholds_from_json(th_a);
  const Thresholds tb = thresholds_from_json(th_b);

  nlohmann::json quality_summary = quality;
  quality_summary.erase("settings");
  nlohmann::json report{{"format", "fuzzvault-report-v1"},
                        {"config", to_json(cfg)},
                        {"thresholds",
                         {{"A", {{"far1", operating_point_json(ta.far1)}, {"far01", operating_point_json(ta.far01)}}},
                          {"B", {{"far1", operating_point_json(tb.far1)}, {"far01", operating_point_json(tb.far01)}}}}},
                        {"attack", attack.at("summary")},
                        {"scheme_id", attack.at("scheme_id")},
                        {"inversion", quality_summary},
                        {"reconstruction", {{"ridge_lambda", rec.at("ridge_lambda")}, {"fit_residual", rec.at("fit_residual")}}},
                        {"scenarios", scenarios},
                        {"artifact_sha256", nlohmann::json::object()}};
  report["run_info"] = {{"generated_at", iso_now()}};
  report["inversion"].erase("run_info");
  report["run_info"]["inversion"] = quality.value("run_info", nlohmann::json::object());
  for (const char* name : {artifact::kAttack, artifact::kInverter, artifact::kInverseMap, artifact::kReconstructions,
                           artifact::kScenariosCsv, artifact::kGuessDb}) {
    auto in = open_in(out_path(cfg, name));
    std::stringstream ss;
    ss << in.rdbuf();
    const Digest dg = sha256(ss.str());
    report["artifact_sha256"][name] = to_hex(std::span<const std::uint8_t>(dg));
  }
  write_json(out_path(cfg, artifact::kReport), report);

  const auto& s = attack.at("summary");
  std::string md = "# Experiment report\n\n";
  md += fmt::format("Seed {}; {} users; guessing DB of {} entries; scheme {}.\n\n", cfg.seed, cfg.users, cfg.db_size,
                    attack.at("scheme_id").get<std::string>());
  md += "## Thresholds (system A)\n\n| FAR | cosine | Hamming | cosine TPR | Hamming TPR |\n|---|---|---|---|---|\n";
  for (const auto* op : {&ta.far1, &ta.far01}) {
    md += fmt::format("| {:.1f}% | {:.4f} | {} | {:.2f}% | {:.2f}% |\n", 100.0 * op->target_far, op->cosine_threshold,
                      op->hamming_threshold, 100.0 * op->cosine_tpr, 100.0 * op->hamming_tpr);
  }
  md += fmt::format("\n## Guessing attack\n\nUnlocked {} of {} accounts ({:.2f}%) at {:.1f}% FAR; every recovered "
                    "template exact: {}. Unprotected baseline: {:.2f}%.\n",
                    s.at("unlocked").get<std::size_t>(), s.at("accounts").get<std::size_t>(),
                    100.0 * s.at("unlock_rate").get<double>(), 100.0 * cfg.far,
                    s.at("all_recoveries_exact").get<bool>() ? "yes" : "no",
                    100.0 * s.at("unprotected_unlock_rate").get<double>());
  if (s.contains("mean_hit_probability")) {
    md += fmt::format("Mean hit probability {:.5f}; predicted unlock rate {:.2f}%.\n",
                      s.at("mean_hit_probability").get<double>(), 100.0 * s.at("predicted_unlock_rate").get<double>());
  }
  md += fmt::format("\n## Inversion\n\nHeld-out mean cosine {:.4f}; {:.2f}% above the 0.1% FAR threshold {:.4f}.\n\n",
                    quality.at("mean_cosine").get<double>(), 100.0 * quality.at("fraction_above_threshold").get<double>(),
                    quality.at("cosine_threshold_far01").get<double>());
  md += "## Scenarios\n\n";
  md += [&] {
    auto in = open_in(out_path(cfg, artifact::kScenariosMd));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }();
  write_text(out_path(cfg, artifact::kReportMd), md);
  log(fmt::format("report: wrote {}", out_path(cfg, artifact::kReport).string()));
  return report;
}

nlohmann::json run_full_pipeline(const ExperimentConfig& cfg, bool resume, const Logger& log) {
  auto stage = [&](const char* name, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };
  stage("gen-population", [&] { stage_gen_population(cfg, log); });
  stage("calibrate", [&] { stage_calibrate(cfg, log); });
  stage("enroll", [&] { stage_enroll(cfg, log); });
  stage("build-db", [&] { stage_build_db(cfg, log); });
  stage("attack", [&] { stage_attack(cfg, log); });
  stage("train-inverter", [&] { stage_train_inverter(cfg, resume, log); });
  stage("reconstruct", [&] { stage_reconstruct(cfg, log); });
  stage("evaluate", [&] { stage_evaluate(cfg, log); });
  nlohmann::json report;
  stage("report", [&] { report = stage_report(cfg, log); });
  return report;
}

bool verify_user(const ExperimentConfig& cfg, const std::string& user, std::uint64_t sample) {
  const auto world = build_world(cfg);
  const AuthSystem sys(load_system(cfg));
  const std::size_t i = identity_of(user);
  if (i >= world.users.size()) throw std::out_of_range(fmt::format("unknown user '{}'", user));
  return sys.authenticate(user, sample_embedding(world.users, i, world.extractor_a, sample)).accepted;
}

bool verify_probe(const ExperimentConfig& cfg, const std::string& user, const std::filesystem::path& probe_csv) {
  const auto rows = load_embeddings(probe_csv);
  if (rows.empty()) throw std::invalid_argument(fmt::format("{}: no probe embedding", probe_csv.string()));
  const AuthSystem sys(load_system(cfg));
  return sys.authenticate(user, rows.front().v).accepted;
}

nlohmann::json strip_timestamps(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("run_info");
    j.erase("enrolled_at");
    for (auto& [_, v] : j.items()) v = strip_timestamps(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timestamps(v);
  }
  return j;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace fuzzvault
