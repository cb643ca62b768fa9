// Command-line driver for the fuzzvault experiment stages.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fuzzvault/experiment.hpp"

using namespace fuzzvault;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string far;
  std::string backend;
  bool quiet = false;
};

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.far.empty()) cfg.far = parse_far_percent(o.far);
  if (!o.backend.empty()) cfg.backend = parse_backend(o.backend);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy-commitment template protection and the attack chain against it"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "Experiment INI file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed (overrides the config)");
  app.add_option("--out", o.out, "Output directory (overrides the config)");
  app.add_option("--far", o.far, "Operating FAR in percent")->check(CLI::IsMember({"1.0", "0.1", "1"}));
  app.add_option("--backend", o.backend, "Secure sketch backend")->check(CLI::IsMember({"bch", "pinsketch"}));
  app.add_flag("-q,--quiet", o.quiet, "Only print errors");

  std::string user;
  std::uint64_t sample = 1;
  std::string probe;
  bool resume = false;

  auto* gen = app.add_subcommand("gen-population", "Write population descriptors and user embeddings");
  auto* cal = app.add_subcommand("calibrate", "Calibrate cosine and Hamming thresholds for both extractors");
  auto* enr = app.add_subcommand("enroll", "Enroll every user into the protected system");
  auto* ver = app.add_subcommand("verify", "Verify one probe; exit 0 accept, 1 reject, 2 error");
  ver->add_option("--user", user, "User id (u000, u001, ...)")->required();
  auto* sample_opt = ver->add_option("--sample", sample, "Image sample seed of the user");
  ver->add_option("--probe", probe, "Embeddings CSV whose first row is the probe")
      ->check(CLI::ExistingFile)
      ->excludes(sample_opt);
  auto* db = app.add_subcommand("build-db", "Build the guessing database from the auxiliary population");
  auto* att = app.add_subcommand("attack", "Run the guessing attack and template recovery");
  auto* tr = app.add_subcommand("train-inverter", "Train the template inversion networks");
  tr->add_flag("--resume", resume, "Reuse a cached model trained with the same settings");
  auto* rec = app.add_subcommand("reconstruct", "Fit the inverse map and reconstruct latents");
  auto* ev = app.add_subcommand("evaluate", "Score the four evaluation scenarios");
  auto* full = app.add_subcommand("full-pipeline", "Run every stage and write the report");
  full->add_flag("--resume", resume, "Reuse a cached inverter when its settings match");
  auto* rep = app.add_subcommand("report", "Rebuild report.json/report.md and print the Markdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kError;
  }

  const Logger log{o.quiet ? std::function<void(const std::string&)>{}
                           : [](const std::string& m) { std::cerr << m << '\n'; }};
  const char* stage = "config";
  try {
    const ExperimentConfig cfg = resolve(o);
    if (gen->parsed()) {
      stage = "gen-population";
      stage_gen_population(cfg, log);
    } else if (cal->parsed()) {
      stage = "calibrate";
      stage_calibrate(cfg, log);
    } else if (enr->parsed()) {
      stage = "enroll";
      stage_enroll(cfg, log);
    } else if (ver->parsed()) {
      stage = "verify";
      const bool ok = probe.empty() ? verify_user(cfg, user, sample) : verify_probe(cfg, user, probe);
      std::cout << (ok ? "accept" : "reject") << '\n';
      return ok ? kAccept : kReject;
    } else if (db->parsed()) {
      stage = "build-db";
      stage_build_db(cfg, log);
    } else if (att->parsed()) {
      stage = "attack";
      stage_attack(cfg, log);
    } else if (tr->parsed()) {
      stage = "train-inverter";
      stage_train_inverter(cfg, resume, log);
    } else if (rec->parsed()) {
      stage = "reconstruct";
      stage_reconstruct(cfg, log);
    } else if (ev->parsed()) {
      stage = "evaluate";
      stage_evaluate(cfg, log);
    } else if (full->parsed()) {
      stage = "full-pipeline";
      run_full_pipeline(cfg, resume, log);
      std::cout << (cfg.out_dir / artifact::kReportMd).string() << '\n';
    } else if (rep->parsed()) {
      stage = "report";
      stage_report(cfg, log);
      std::ifstream in(cfg.out_dir / artifact::kReportMd);
      std::cout << in.rdbuf();
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << '\n';
    return kError;
  }
  return 0;
}
