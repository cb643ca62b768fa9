#include "fuzzvault/reconstructor.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "fuzzvault/blob.hpp"

namespace fuzzvault {

InverseMap fit_inverse_map(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& embeddings, double ridge_lambda) {
  const Eigen::Index n = latents.cols();
  if (embeddings.cols() != n) {
    throw std::invalid_argument(fmt::format("fit_inverse_map: {} latents vs {} embeddings", n, embeddings.cols()));
  }
  if (n < latents.rows()) {
    throw std::invalid_argument(fmt::format("fit_inverse_map: {} pairs, need at least d_latent = {}", n, latents.rows()));
  }
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw std::invalid_argument("fit_inverse_map: ridge_lambda must be finite and >= 0");
  }
  const Eigen::VectorXd x_mean = latents.rowwise().mean();
  const Eigen::VectorXd v_mean = embeddings.rowwise().mean();
  const Eigen::MatrixXd xc = latents.colwise() - x_mean;
  const Eigen::MatrixXd vc = embeddings.colwise() - v_mean;

  const Eigen::Index d = embeddings.rows();
  Eigen::MatrixXd gram = vc * vc.transpose();
  gram.diagonal().array() += ridge_lambda;
  const Eigen::MatrixXd cross = vc * xc.transpose();  // d x d_latent

  InverseMap map;
  map.ridge_lambda = ridge_lambda;
  if (ridge_lambda == 0.0) {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < d) {
      throw std::invalid_argument(fmt::format("fit_inverse_map: design matrix has rank {} < {}", lu.rank(), d));
    }
    map.matrix = lu.solve(cross).transpose();
  } else {
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("fit_inverse_map: ridge system not positive definite");
    map.matrix = llt.solve(cross).transpose();
  }
  map.bias = x_mean - map.matrix * v_mean;
  if (!map.matrix.allFinite() || !map.bias.allFinite()) throw std::invalid_argument("fit_inverse_map: non-finite fit");
  const Eigen::MatrixXd resid = (map.matrix * embeddings).colwise() + map.bias - latents;
  map.fit_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  return map;
}

Eigen::VectorXd reconstruct(const InverseMap& map, const FeatureVector& v_hat) {
  if (static_cast<std::size_t>(v_hat.size()) != map.d()) {
    throw std::invalid_argument(fmt::format("reconstruct: vector of size {} for a map over d = {}", v_hat.size(), map.d()));
  }
  const Eigen::VectorXd x = map.matrix * v_hat + map.bias;
  const double norm = x.norm();
  return norm > 0.0 ? Eigen::VectorXd(x / norm) : x;
}

AuxPairs make_aux_pairs(const Population& pop, const Extractor& extractor, std::size_t samples_per_identity) {
  const auto n = static_cast<Eigen::Index>(pop.size() * samples_per_identity);
  AuxPairs out{Eigen::MatrixXd(pop.d_latent(), n), Eigen::MatrixXd(extractor.d(), n)};
  Eigen::Index col = 0;
  for (std::size_t s = 0; s < samples_per_identity; ++s) {
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const Eigen::VectorXd image = sample_image(pop, i, extractor.noise_sigma(), s);
      out.latents.col(col) = image;
      out.embeddings.col(col) = extractor.embed(image);
      ++col;
    }
  }
  return out;
}

nlohmann::json to_json(const InverseMap& map) {
  return {{"format", "fuzzvault-inverse-map-v1"},
          {"d", map.d()},
          {"d_latent", map.d_latent()},
          {"ridge_lambda", map.ridge_lambda},
          {"fit_residual", map.fit_residual},
          {"matrix", encode_blob(map.matrix)},
          {"bias", encode_blob(map.bias)}};
}

InverseMap inverse_map_from_json(const nlohmann::json& j) {
  if (j.at("format") != "fuzzvault-inverse-map-v1") throw std::invalid_argument("inverse map: unknown format");
  const auto d = j.at("d").get<Eigen::Index>();
  const auto dl = j.at("d_latent").get<Eigen::Index>();
  InverseMap map;
  map.ridge_lambda = j.at("ridge_lambda").get<double>();
  map.fit_residual = j.at("fit_residual").get<double>();
  map.matrix = decode_blob(j.at("matrix").get<std::string>(), dl, d);
  map.bias = decode_blob(j.at("bias").get<std::string>(), dl, 1);
  if (!map.matrix.allFinite() || !map.bias.allFinite()) throw std::invalid_argument("inverse map: non-finite entries");
  return map;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kSisfe: return "SISFE";
    case Scenario::kDisfe: return "DISFE";
    case Scenario::kSidfe: return "SIDFE";
    case Scenario::kDidfe: return "DIDFE";
  }
  return "?";
}

std::string_view to_string(MatchSpace s) { return s == MatchSpace::kFeature ? "feature" : "binary"; }

std::string_view to_string(ProbeSource s) {
  switch (s) {
    case ProbeSource::kAttack: return "attack";
    case ProbeSource::kOriginal: return "original";
    case ProbeSource::kSystem: return "system";
  }
  return "?";
}

bool different_image(Scenario s) { return s == Scenario::kDisfe || s == Scenario::kDidfe; }
bool different_extractor(Scenario s) { return s == Scenario::kSidfe || s == Scenario::kDidfe; }

namespace {

struct Reference {
  FeatureVector v;
  BitVector b;
};

bool passes(const VerifierSystem& sys, const Reference& ref, const FeatureVector& probe, MatchSpace space,
            double far) {
  const auto& op = sys.thresholds.at(far);
  if (space == MatchSpace::kFeature) return cosine(probe, ref.v) >= op.cosine_threshold;
  const auto dist = hamming(binarize(probe, sys.projection), ref.b);
  return static_cast<long long>(dist) <= op.hamming_threshold;
}

}  // namespace

std::vector<ScenarioResult> evaluate_scenarios(const VerifierSystem& a, const VerifierSystem& b,
                                               const Population& users, std::span<const ScenarioAccount> accounts,
                                               std::span<const Eigen::VectorXd> attack_latents,
                                               std::span<const Eigen::VectorXd> original_latents,
                                               const ScenarioSetup& setup) {
  if (attack_latents.size() != accounts.size()) {
    throw std::invalid_argument(
        fmt::format("evaluate_scenarios: {} accounts but {} reconstructions", accounts.size(), attack_latents.size()));
  }
  if (!original_latents.empty() && original_latents.size() != accounts.size()) {
    throw std::invalid_argument(fmt::format("evaluate_scenarios: {} accounts but {} original reconstructions",
                                            accounts.size(), original_latents.size()));
  }
  if (a.extractor.seed() == b.extractor.seed()) {
    throw std::invalid_argument("evaluate_scenarios: the second system must use a different extractor");
  }
  if (setup.enroll_sample == setup.other_sample) {
    throw std::invalid_argument("evaluate_scenarios: enroll and other sample seeds must differ");
  }
  for (const auto& acc : accounts) {
    if (acc.identity >= users.size()) throw std::invalid_argument("evaluate_scenarios: account identity out of range");
  }

  std::vector<ProbeSource> sources{ProbeSource::kAttack};
  if (!original_latents.empty()) sources.push_back(ProbeSource::kOriginal);
  sources.push_back(ProbeSource::kSystem);

  std::size_t unlocked = 0;
  for (const auto& acc : accounts) unlocked += acc.unlocked;
  const double unlock_rate = accounts.empty() ? 0.0 : static_cast<double>(unlocked) / static_cast<double>(accounts.size());

  std::vector<ScenarioResult> out;
  for (const auto source : sources) {
    for (const auto scenario : kScenarios) {
      const VerifierSystem& sys = different_extractor(scenario) ? b : a;
      const std::uint64_t ref_sample = different_image(scenario) ? setup.other_sample : setup.enroll_sample;
      std::vector<Reference> refs;
      std::vector<FeatureVector> probes;
      for (std::size_t i = 0; i < accounts.size(); ++i) {
        const auto id = accounts[i].identity;
        FeatureVector ref = sample_embedding(users, id, sys.extractor, ref_sample);
        BitVector ref_bits = binarize(ref, sys.projection);
        refs.push_back({std::move(ref), std::move(ref_bits)});
        switch (source) {
          case ProbeSource::kAttack: probes.push_back(sys.extractor.embed(attack_latents[i])); break;
          case ProbeSource::kOriginal: probes.push_back(sys.extractor.embed(original_latents[i])); break;
          case ProbeSource::kSystem:
            // The genuine image the target system enrolled.
            probes.push_back(sample_embedding(users, id, sys.extractor, setup.enroll_sample));
            break;
        }
      }
      for (const auto space : {MatchSpace::kFeature, MatchSpace::kBinary}) {
        for (const double far : kScenarioFars) {
          ScenarioResult r{scenario, space, source, far, accounts.size()};
          std::size_t joint = 0;
          for (std::size_t i = 0; i < accounts.size(); ++i) {
            if (passes(sys, refs[i], probes[i], space, far)) {
              ++r.successes;
              joint += accounts[i].unlocked;
            }
          }
          const double n = static_cast<double>(accounts.size());
          r.success_rate = accounts.empty() ? 0.0 : static_cast<double>(r.successes) / n;
          const bool attack = source == ProbeSource::kAttack;
          r.success_rate_full_attack = attack ? r.success_rate * unlock_rate : r.success_rate;
          r.joint_rate = attack ? (accounts.empty() ? 0.0 : static_cast<double>(joint) / n) : r.success_rate;
          out.push_back(r);
        }
      }
    }
  }
  return out;
}

const ScenarioResult& find_result(std::span<const ScenarioResult> results, ProbeSource source, Scenario scenario,
                                  MatchSpace space, double far) {
  for (const auto& r : results) {
    if (r.source == source && r.scenario == scenario && r.space == space && std::abs(r.far_target - far) < 1e-12) {
      return r;
    }
  }
  throw std::out_of_range(fmt::format("no {} {} {} result at FAR {}", to_string(source), to_string(scenario),
                                      to_string(space), far));
}

std::string scenario_csv(std::span<const ScenarioResult> results) {
  std::string out = "source,scenario,space,far_target,n_accounts,successes,success_rate,success_rate_full_attack,joint_rate\n";
  for (const auto& r : results) {
    out += fmt::format("{},{},{},{},{},{},{:.6f},{:.6f},{:.6f}\n", to_string(r.source), to_string(r.scenario),
                       to_string(r.space), r.far_target, r.n_accounts, r.successes, r.success_rate,
                       r.success_rate_full_attack, r.joint_rate);
  }
  return out;
}

std::string scenario_markdown(std::span<const ScenarioResult> results) {
  std::string out;
  for (const auto scenario : kScenarios) {
    out += fmt::format("### {}\n\n", to_string(scenario));
    out += "| | Feature 1.0% FAR | Binary 1.0% FAR | Feature 0.1% FAR | Binary 0.1% FAR |\n";
    out += "|---|---|---|---|---|\n";
    for (const auto source : {ProbeSource::kAttack, ProbeSource::kOriginal, ProbeSource::kSystem}) {
      std::string row;
      bool any = false;
      for (const double far : kScenarioFars) {
        for (const auto space : {MatchSpace::kFeature, MatchSpace::kBinary}) {
          const ScenarioResult* hit = nullptr;
          for (const auto& r : results) {
            if (r.source == source && r.scenario == scenario && r.space == space && r.far_target == far) hit = &r;
          }
          if (!hit) {
            row += " - |";
            continue;
          }
          any = true;
          row += fmt::format(" {:.2f}%", 100.0 * hit->success_rate);
          if (source == ProbeSource::kAttack) row += fmt::format(" ({:.2f}%)", 100.0 * hit->success_rate_full_attack);
          row += " |";
        }
      }
      const char* label = source == ProbeSource::kAttack     ? "Attack"
                          : source == ProbeSource::kOriginal ? "Original reconstruction"
                                                             : "System";
      if (any) out += fmt::format("| {} |{}\n", label, row);
    }
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(std::span<const ScenarioResult> results) {
  auto arr = nlohmann::json::array();
  for (const auto& r : results) {
    arr.push_back({{"source", to_string(r.source)},
                   {"scenario", to_string(r.scenario)},
                   {"space", to_string(r.space)},
                   {"far_target", r.far_target},
                   {"n_accounts", r.n_accounts},
                   {"successes", r.successes},
                   {"success_rate", r.success_rate},
                   {"success_rate_full_attack", r.success_rate_full_attack},
                   {"joint_rate", r.joint_rate}});
  }
  return arr;
}

}  // namespace fuzzvault
