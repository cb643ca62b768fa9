#include "fuzzvault/inversion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "fuzzvault/blob.hpp"
#include "fuzzvault/hash.hpp"

namespace fuzzvault {

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::kSigmoid) z = (1.0 + (-z.array()).exp()).inverse().matrix();
}

std::string_view activation_name(Activation a) { return a == Activation::kSigmoid ? "sigmoid" : "identity"; }

Activation parse_activation(std::string_view s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument(fmt::format("unknown activation '{}'", s));
}

double column_cosine_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::vector<double>* out = nullptr) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double c = a.col(i).dot(b.col(i)) / (a.col(i).norm() * b.col(i).norm());
    sum += c;
    if (out) out->push_back(c);
  }
  return a.cols() == 0 ? 0.0 : sum / static_cast<double>(a.cols());
}

}  // namespace

Mlp Mlp::create(std::span<const std::size_t> dims, std::uint64_t seed, Activation activation) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    if (in == 0 || out == 0) throw std::invalid_argument("Mlp: zero layer size");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    }
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers), activation, seed);
}

Mlp Mlp::standard(std::uint64_t seed, std::size_t dim, std::size_t hidden) {
  const std::size_t dims[] = {dim, hidden, hidden, dim};
  return create(dims, seed, Activation::kSigmoid);
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& l : layers_) d.push_back(static_cast<std::size_t>(l.weight.rows()));
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool Mlp::finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x).col(0);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw std::invalid_argument(fmt::format("Mlp: input dimension {} != {}", x.rows(), input_dim()));
  }
  Eigen::MatrixXd a = x;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    activate(z, activation_);
    a = std::move(z);
  }
  return a;
}

Tape Mlp::forward_tape(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw std::invalid_argument(fmt::format("Mlp: input dimension {} != {}", x.rows(), input_dim()));
  }
  Tape t;
  t.activations.reserve(layers_.size() + 1);
  t.activations.push_back(x);
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weight * t.activations.back();
    z.colwise() += l.bias;
    activate(z, activation_);
    t.activations.push_back(std::move(z));
  }
  return t;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, Eigen::MatrixXd d_out, std::vector<Layer>& grads) const {
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& a = tape.activations[l + 1];
    if (activation_ == Activation::kSigmoid) d_out.array() *= a.array() * (1.0 - a.array());
    grads[l].weight.noalias() += d_out * tape.activations[l].transpose();
    grads[l].bias += d_out.rowwise().sum();
    d_out = layers_[l].weight.transpose() * d_out;
  }
  return d_out;
}

std::vector<Layer> Mlp::zero_gradients() const {
  std::vector<Layer> g;
  g.reserve(layers_.size());
  for (const auto& l : layers_) {
    g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

void Mlp::sgd_step(const std::vector<Layer>& grads, double learning_rate) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight -= learning_rate * grads[l].weight;
    layers_[l].bias -= learning_rate * grads[l].bias;
  }
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  for (const auto& l : layers_) {
    p.insert(p.end(), l.weight.data(), l.weight.data() + l.weight.size());
    p.insert(p.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return p;
}

void Mlp::unflatten(std::span<const double> params) {
  if (params.size() != parameter_count()) throw std::invalid_argument("Mlp: parameter count mismatch");
  std::size_t off = 0;
  for (auto& l : layers_) {
    std::copy_n(params.data() + off, l.weight.size(), l.weight.data());
    off += static_cast<std::size_t>(l.weight.size());
    std::copy_n(params.data() + off, l.bias.size(), l.bias.data());
    off += static_cast<std::size_t>(l.bias.size());
  }
}

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"weight", encode_blob(l.weight)},
                      {"bias", encode_blob(l.bias.transpose())}});
  }
  return {{"architecture", {{"dims", net.dims()}, {"activation", std::string(activation_name(net.activation()))}}},
          {"seed", net.seed()},
          {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  const auto dims = j.at("architecture").at("dims").get<std::vector<std::size_t>>();
  Mlp net = Mlp::create(dims, j.value("seed", std::uint64_t{0}),
                        parse_activation(j.at("architecture").at("activation").get<std::string>()));
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers().size()) throw std::invalid_argument("Mlp json: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = net.layers()[l];
    const auto rows = layers[l].at("rows").get<Eigen::Index>();
    const auto cols = layers[l].at("cols").get<Eigen::Index>();
    if (rows != dst.weight.rows() || cols != dst.weight.cols()) throw std::invalid_argument("Mlp json: shape mismatch");
    dst.weight = decode_blob(layers[l].at("weight").get<std::string>(), rows, cols);
    dst.bias = decode_blob(layers[l].at("bias").get<std::string>(), 1, rows).row(0).transpose();
  }
  if (!net.finite()) throw std::invalid_argument("Mlp json: non-finite parameters");
  return net;
}

double bce(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, double eps) {
  const Eigen::ArrayXXd pc = p.array().max(eps).min(1.0 - eps);
  const Eigen::ArrayXXd ya = y.array();
  return -(ya * pc.log() + (1.0 - ya) * (1.0 - pc).log()).mean();
}

Eigen::MatrixXd bce_grad(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, double eps) {
  const double n = static_cast<double>(p.size());
  const Eigen::ArrayXXd pa = p.array();
  const Eigen::ArrayXXd inside = ((pa >= eps) && (pa <= 1.0 - eps)).cast<double>();
  return (inside * (pa - y.array()) / (pa * (1.0 - pa)).max(eps * (1.0 - eps)) / n).matrix();
}

double mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& t) { return (a - t).array().square().mean(); }

Eigen::MatrixXd mse_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& t) {
  return 2.0 * (a - t) / static_cast<double>(a.size());
}

double FeatureCode::kappa(std::size_t d) const { return spread * std::sqrt(static_cast<double>(d)); }

Eigen::MatrixXd FeatureCode::encode(const Eigen::MatrixXd& v) const {
  return (0.5 + kappa(static_cast<std::size_t>(v.rows())) * v.array()).matrix();
}

Eigen::MatrixXd FeatureCode::decode(const Eigen::MatrixXd& y) const {
  Eigen::MatrixXd v = (y.array() - 0.5).matrix();
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    const double n = v.col(i).norm();
    if (n > 0) v.col(i) /= n;
  }
  return v;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("train config: lambda must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning rate must be > 0");
  if (batch_size == 0) throw std::invalid_argument("train config: batch size must be >= 1");
  if (!(bce_epsilon > 0 && bce_epsilon < 0.5)) throw std::invalid_argument("train config: bce epsilon out of range");
  if (!(code.spread > 0)) throw std::invalid_argument("train config: spread must be > 0");
}

PairSet make_pairs(std::span<const FeatureVector> vs, const ProjectionMatrix& w) {
  PairSet p;
  p.v.resize(static_cast<Eigen::Index>(w.d_in()), static_cast<Eigen::Index>(vs.size()));
  p.b.resize(static_cast<Eigen::Index>(w.n_out()), static_cast<Eigen::Index>(vs.size()));
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    p.v.col(c) = vs[i];
    p.b.col(c) = to_real(binarize(vs[i], w));
  }
  return p;
}

PairSet slice(const PairSet& pairs, std::size_t begin, std::size_t end) {
  const auto b = static_cast<Eigen::Index>(begin);
  const auto n = static_cast<Eigen::Index>(end - begin);
  return {pairs.v.middleCols(b, n), pairs.b.middleCols(b, n)};
}

LossTerms loss_total(const Mlp& f, const Mlp& g, const Eigen::MatrixXd& v_code, const Eigen::MatrixXd& b,
                     double lambda, double eps) {
  const Eigen::MatrixXd fv = f.forward_batch(v_code);
  const Eigen::MatrixXd gb = g.forward_batch(b);
  LossTerms t;
  t.f_pred = bce(fv, b, eps);
  t.g_pred = mse(gb, v_code);
  t.cyc_ftr = mse(g.forward_batch(fv), v_code);
  t.cyc_bin = bce(f.forward_batch(gb), b, eps);
  t.f_total = t.f_pred + lambda * (t.cyc_ftr + t.cyc_bin);
  t.g_total = t.g_pred + lambda * (t.cyc_ftr + t.cyc_bin);
  return t;
}

JointGradients joint_gradients(const Mlp& f, const Mlp& g, const Eigen::MatrixXd& v_code, const Eigen::MatrixXd& b,
                               double lambda, double eps) {
  JointGradients out{{}, f.zero_gradients(), g.zero_gradients()};
  const Tape f_v = f.forward_tape(v_code);
  const Tape g_b = g.forward_tape(b);
  const Tape g_fv = g.forward_tape(f_v.output());
  const Tape f_gb = f.forward_tape(g_b.output());

  LossTerms& t = out.loss;
  t.f_pred = bce(f_v.output(), b, eps);
  t.g_pred = mse(g_b.output(), v_code);
  t.cyc_ftr = mse(g_fv.output(), v_code);
  t.cyc_bin = bce(f_gb.output(), b, eps);
  t.f_total = t.f_pred + lambda * (t.cyc_ftr + t.cyc_bin);
  t.g_total = t.g_pred + lambda * (t.cyc_ftr + t.cyc_bin);

  // v -> F -> G: G on its own tape, then back into F(v).
  Eigen::MatrixXd d_fv = g.backward(g_fv, lambda * mse_grad(g_fv.output(), v_code), out.g);
  d_fv += bce_grad(f_v.output(), b, eps);
  f.backward(f_v, std::move(d_fv), out.f);
  // b -> G -> F: F on its own tape, then back into G(b).
  Eigen::MatrixXd d_gb = f.backward(f_gb, lambda * bce_grad(f_gb.output(), b, eps), out.f);
  d_gb += mse_grad(g_b.output(), v_code);
  g.backward(g_b, std::move(d_gb), out.g);
  return out;
}

TrainResult train(Mlp& f, Mlp& g, const PairSet& data, const PairSet& validation, const TrainConfig& cfg, Rng& rng,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (f.input_dim() != static_cast<std::size_t>(data.v.rows()) || g.input_dim() != static_cast<std::size_t>(data.b.rows()) ||
      f.output_dim() != g.input_dim() || g.output_dim() != f.input_dim()) {
    throw std::invalid_argument("train: network and data dimensions disagree");
  }
  const Eigen::MatrixXd v_code = cfg.code.encode(data.v);
  const Eigen::MatrixXd val_code = cfg.code.encode(validation.v);

  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  Eigen::MatrixXd vb, bb;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(data.size(), start + cfg.batch_size);
      const auto n = static_cast<Eigen::Index>(end - start);
      vb.resize(v_code.rows(), n);
      bb.resize(data.b.rows(), n);
      for (Eigen::Index i = 0; i < n; ++i) {
        vb.col(i) = v_code.col(order[start + static_cast<std::size_t>(i)]);
        bb.col(i) = data.b.col(order[start + static_cast<std::size_t>(i)]);
      }
      const JointGradients jg = joint_gradients(f, g, vb, bb, cfg.lambda, cfg.bce_epsilon);
      if (!std::isfinite(jg.loss.f_total) || !std::isfinite(jg.loss.g_total)) {
        throw std::runtime_error(fmt::format("train: loss diverged at epoch {} batch {} (L_F={}, L_G={})", epoch + 1,
                                             batches + 1, jg.loss.f_total, jg.loss.g_total));
      }
      f.sgd_step(jg.f, cfg.learning_rate);
      g.sgd_step(jg.g, cfg.learning_rate);
      if (!f.finite() || !g.finite()) {
        throw std::runtime_error(
            fmt::format("train: parameters diverged at epoch {} batch {}", epoch + 1, batches + 1));
      }
      rec.train.f_pred += jg.loss.f_pred;
      rec.train.g_pred += jg.loss.g_pred;
      rec.train.cyc_ftr += jg.loss.cyc_ftr;
      rec.train.cyc_bin += jg.loss.cyc_bin;
      rec.train.f_total += jg.loss.f_total;
      rec.train.g_total += jg.loss.g_total;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    for (double* x : {&rec.train.f_pred, &rec.train.g_pred, &rec.train.cyc_ftr, &rec.train.cyc_bin, &rec.train.f_total,
                      &rec.train.g_total}) {
      *x /= nb;
    }
    if (validation.size() > 0) {
      const Eigen::MatrixXd gb = g.forward_batch(validation.b);
      rec.val_g_pred = mse(gb, val_code);
      rec.val_cosine = column_cosine_mean(cfg.code.decode(gb), validation.v);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (validation.size() > 0 && cfg.patience > 0) {
      if (rec.val_g_pred < best) {
        best = rec.val_g_pred;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

std::string loss_history_csv(const TrainResult& result) {
  std::string out = "epoch,f_pred,g_pred,cyc_ftr,cyc_bin,f_total,g_total,val_g_pred,val_cosine\n";
  for (const auto& r : result.history) {
    out += fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", r.epoch, r.train.f_pred,
                       r.train.g_pred, r.train.cyc_ftr, r.train.cyc_bin, r.train.f_total, r.train.g_total, r.val_g_pred,
                       r.val_cosine);
  }
  return out;
}

FeatureVector invert(const Mlp& g, const BitVector& b, const FeatureCode& code) {
  return code.decode(g.forward_batch(Eigen::MatrixXd(to_real(b)))).col(0);
}

Eigen::MatrixXd invert_batch(const Mlp& g, const Eigen::MatrixXd& b, const FeatureCode& code) {
  return code.decode(g.forward_batch(b));
}

InversionQuality evaluate_inversion(const Mlp& f, const Mlp& g, const PairSet& heldout, const ProjectionMatrix& w,
                                    const FeatureCode& code, double cosine_threshold) {
  InversionQuality q;
  if (heldout.size() == 0) return q;
  const Eigen::MatrixXd v_hat = invert_batch(g, heldout.b, code);
  q.mean_cosine = column_cosine_mean(v_hat, heldout.v, &q.cosines);
  q.fraction_above = static_cast<double>(std::count_if(q.cosines.begin(), q.cosines.end(),
                                                       [&](double c) { return c >= cosine_threshold; })) /
                     static_cast<double>(q.cosines.size());
  const Eigen::MatrixXd fv = f.forward_batch(code.encode(heldout.v));
  const Eigen::ArrayXXd f_bits = (fv.array() >= 0.5).cast<double>();
  q.f_bit_agreement = (f_bits == heldout.b.array()).cast<double>().mean();
  q.cycle_cosine = column_cosine_mean(code.decode(g.forward_batch(fv)), heldout.v);
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < v_hat.cols(); ++i) {
    const Eigen::VectorXd rb = to_real(binarize(v_hat.col(i), w));
    dist.push_back((rb - heldout.b.col(i)).cwiseAbs().sum());
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2), dist.end());
  q.median_rebinarized_hamming = dist[dist.size() / 2];
  return q;
}

double gradient_check(Mlp& net, const std::function<double(const Mlp&)>& loss,
                      const std::function<std::vector<Layer>(const Mlp&)>& analytic, double step) {
  const std::vector<Layer> grads = analytic(net);
  std::vector<double> flat_grad;
  for (const auto& l : grads) {
    flat_grad.insert(flat_grad.end(), l.weight.data(), l.weight.data() + l.weight.size());
    flat_grad.insert(flat_grad.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  std::vector<double> params = net.flatten();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + step;
    net.unflatten(params);
    const double up = loss(net);
    params[i] = keep - step;
    net.unflatten(params);
    const double down = loss(net);
    params[i] = keep;
    const double numeric = (up - down) / (2 * step);
    const double denom = std::max({std::abs(numeric), std::abs(flat_grad[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - flat_grad[i]) / denom);
  }
  net.unflatten(params);
  return worst;
}

double joint_gradient_check(Mlp& f, Mlp& g, const Eigen::MatrixXd& v_code, const Eigen::MatrixXd& b, double lambda,
                            double eps, double step) {
  auto joint = [&](const Mlp& ff, const Mlp& gg) {
    const LossTerms t = loss_total(ff, gg, v_code, b, lambda, eps);
    return t.f_pred + t.g_pred + lambda * (t.cyc_ftr + t.cyc_bin);
  };
  const double ef = gradient_check(
      f, [&](const Mlp& ff) { return joint(ff, g); },
      [&](const Mlp& ff) { return joint_gradients(ff, g, v_code, b, lambda, eps).f; }, step);
  const double eg = gradient_check(
      g, [&](const Mlp& gg) { return joint(f, gg); },
      [&](const Mlp& gg) { return joint_gradients(f, gg, v_code, b, lambda, eps).g; }, step);
  return std::max(ef, eg);
}

void save_inverter(const std::filesystem::path& path, const InverterBundle& bundle) {
  const nlohmann::json j{{"format", "fuzzvault-inverter-v1"},
                         {"projection_seed", bundle.projection_seed},
                         {"train_config",
                          {{"lambda", bundle.config.lambda},
                           {"learning_rate", bundle.config.learning_rate},
                           {"batch_size", bundle.config.batch_size},
                           {"epochs", bundle.config.epochs},
                           {"bce_epsilon", bundle.config.bce_epsilon},
                           {"patience", bundle.config.patience},
                           {"spread", bundle.config.code.spread}}},
                         {"f", to_json(bundle.f)},
                         {"g", to_json(bundle.g)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

InverterBundle load_inverter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", std::string()) != "fuzzvault-inverter-v1") {
    throw std::invalid_argument(path.string() + ": not an inverter file");
  }
  const auto& c = j.at("train_config");
  TrainConfig cfg;
  cfg.lambda = c.at("lambda").get<double>();
  cfg.learning_rate = c.at("learning_rate").get<double>();
  cfg.batch_size = c.at("batch_size").get<std::size_t>();
  cfg.epochs = c.at("epochs").get<std::size_t>();
  cfg.bce_epsilon = c.at("bce_epsilon").get<double>();
  cfg.patience = c.at("patience").get<std::size_t>();
  cfg.code.spread = c.at("spread").get<double>();
  cfg.validate();
  return {mlp_from_json(j.at("f")), mlp_from_json(j.at("g")), cfg, j.at("projection_seed").get<std::uint64_t>()};
}

}  // namespace fuzzvault
