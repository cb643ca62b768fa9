#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fuzzvault/bch.hpp"
#include "fuzzvault/binarize.hpp"

namespace fuzzvault {

enum class Activation { kSigmoid, kIdentity };

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Activations of one forward pass; samples are columns.
struct Tape {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, back() = output

  const Eigen::MatrixXd& output() const { return activations.back(); }
};

class Mlp {
 public:
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp create(std::span<const std::size_t> dims, std::uint64_t seed, Activation activation = Activation::kSigmoid);
  /// 128 -> 256 -> 256 -> 128 with sigmoid after every layer.
  static Mlp standard(std::uint64_t seed, std::size_t dim = 128, std::size_t hidden = 256);

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().weight.rows()); }
  std::vector<std::size_t> dims() const;
  Activation activation() const { return activation_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t parameter_count() const;
  bool finite() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  Tape forward_tape(const Eigen::MatrixXd& x) const;

  /// Accumulates parameter gradients of a loss with output gradient `d_out`
  /// into `grads` (same shapes as layers()) and returns the input gradient.
  Eigen::MatrixXd backward(const Tape& tape, Eigen::MatrixXd d_out, std::vector<Layer>& grads) const;

  std::vector<Layer> zero_gradients() const;
  void sgd_step(const std::vector<Layer>& grads, double learning_rate);

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

 private:
  Mlp(std::vector<Layer> layers, Activation activation, std::uint64_t seed)
      : layers_(std::move(layers)), activation_(activation), seed_(seed) {}

  std::vector<Layer> layers_;
  Activation activation_ = Activation::kSigmoid;
  std::uint64_t seed_ = 0;
};

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

/// Mean binary cross entropy over every coordinate, inputs clamped to
/// [eps, 1 - eps]. The gradient is zero where the clamp is active.
double bce(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, double eps);
Eigen::MatrixXd bce_grad(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, double eps);
double mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& t);
Eigen::MatrixXd mse_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& t);

/// Affine map between unit feature vectors and the sigmoid range:
/// y = 1/2 + kappa * v with kappa = spread * sqrt(d).
struct FeatureCode {
  double spread = 0.25;

  double kappa(std::size_t d) const;
  Eigen::MatrixXd encode(const Eigen::MatrixXd& v) const;
  /// Inverse map followed by per-column L2 normalization.
  Eigen::MatrixXd decode(const Eigen::MatrixXd& y) const;
};

struct TrainConfig {
  double lambda = 0.85;
  double learning_rate = 0.9;
  std::size_t batch_size = 50;
  std::size_t epochs = 100;
  double bce_epsilon = 1e-7;
  /// Stop when validation L_G has not improved for this many epochs (0 = off).
  std::size_t patience = 20;
  FeatureCode code;

  void validate() const;
};

/// Training pairs: v unit feature vectors (d x N), b their templates (n x N, 0/1).
struct PairSet {
  Eigen::MatrixXd v;
  Eigen::MatrixXd b;

  std::size_t size() const { return static_cast<std::size_t>(v.cols()); }
};

PairSet make_pairs(std::span<const FeatureVector> vs, const ProjectionMatrix& w);
PairSet slice(const PairSet& pairs, std::size_t begin, std::size_t end);

struct LossTerms {
  double f_pred = 0.0;    // BCE(F(v), b)
  double g_pred = 0.0;    // MSE(G(b), v)
  double cyc_ftr = 0.0;   // MSE(G(F(v)), v)
  double cyc_bin = 0.0;   // BCE(F(G(b)), b)
  double f_total = 0.0;
  double g_total = 0.0;
};

/// Both total losses on a batch whose v is already in network coordinates.
LossTerms loss_total(const Mlp& f, const Mlp& g, const Eigen::MatrixXd& v_code, const Eigen::MatrixXd& b,
                     double lambda, double eps);

struct JointGradients {
  LossTerms loss;
  std::vector<Layer> f;
  std::vector<Layer> g;
};

/// Gradients of L_F_total w.r.t. F and of L_G_total w.r.t. G. Each net's
/// prediction term does not involve the other net, so both equal the
/// gradient of L_F_pred + L_G_pred + lambda (L_cyc_ftr + L_cyc_bin).
JointGradients joint_gradients(const Mlp& f, const Mlp& g, const Eigen::MatrixXd& v_code, const Eigen::MatrixXd& b,
                               double lambda, double eps);

struct EpochRecord {
  std::size_t epoch = 0;
  LossTerms train;
  double val_g_pred = 0.0;
  double val_cosine = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

/// Plain minibatch SGD over shuffled batches. `validation` drives early
/// stopping and may be empty. Throws std::runtime_error on a non-finite loss.
TrainResult train(Mlp& f, Mlp& g, const PairSet& data, const PairSet& validation, const TrainConfig& cfg, Rng& rng,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

std::string loss_history_csv(const TrainResult& result);

/// v-hat = decode(G(b)), unit norm.
FeatureVector invert(const Mlp& g, const BitVector& b, const FeatureCode& code);
Eigen::MatrixXd invert_batch(const Mlp& g, const Eigen::MatrixXd& b, const FeatureCode& code);

struct InversionQuality {
  double mean_cosine = 0.0;
  double fraction_above = 0.0;
  double f_bit_agreement = 0.0;
  double cycle_cosine = 0.0;  // mean cosine(decode(G(F(v))), v)
  double median_rebinarized_hamming = 0.0;
  std::vector<double> cosines;
};

InversionQuality evaluate_inversion(const Mlp& f, const Mlp& g, const PairSet& heldout, const ProjectionMatrix& w,
                                    const FeatureCode& code, double cosine_threshold);

/// Largest relative error between the analytic gradient and central finite
/// differences over every parameter of `net`. `loss` maps the network to a
/// scalar; `analytic` returns its parameter gradients.
double gradient_check(Mlp& net, const std::function<double(const Mlp&)>& loss,
                      const std::function<std::vector<Layer>(const Mlp&)>& analytic, double step = 1e-5);

/// Checks both nets against the full combined loss J.
double joint_gradient_check(Mlp& f, Mlp& g, const Eigen::MatrixXd& v_code, const Eigen::MatrixXd& b, double lambda,
                            double eps, double step = 1e-5);

struct InverterBundle {
  Mlp f;
  Mlp g;
  TrainConfig config;
  std::uint64_t projection_seed = 0;
};

void save_inverter(const std::filesystem::path& path, const InverterBundle& bundle);
InverterBundle load_inverter(const std::filesystem::path& path);

}  // namespace fuzzvault
