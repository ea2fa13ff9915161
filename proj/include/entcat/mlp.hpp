#pragma once

// Dense feedforward binary classifier trained by backpropagation.
//
// Samples are stored column-wise (one column per sample) so a minibatch is
// a (fan_in x batch) matrix and each layer is a single GEMM. All parameters,
// biases included, are Eigen::MatrixXd so optimizers treat them uniformly.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "entcat/datagen.hpp"
#include "entcat/error.hpp"
#include "entcat/random.hpp"

namespace entcat {

enum class Activation { Relu, Sigmoid };

constexpr std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "sigmoid"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + std::string(s) + "'");
}

struct LayerSpec {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  Activation activation = Activation::Relu;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::MatrixXd bias;     // fan_out x 1
  Activation activation = Activation::Relu;
};

class MlpModel {
 public:
  MlpModel() = default;

  /// Glorot-uniform weights, zero biases. The last layer must be 1-wide sigmoid.
  static MlpModel from_specs(std::span<const LayerSpec> specs, std::uint64_t seed) {
    if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "model needs at least one layer");
    for (std::size_t k = 0; k + 1 < specs.size(); ++k)
      if (specs[k].fan_out != specs[k + 1].fan_in)
        throw Error(ErrorCode::DimMismatch, "layer " + std::to_string(k) + " does not chain");
    if (specs.back().fan_out != 1 || specs.back().activation != Activation::Sigmoid)
      throw Error(ErrorCode::InvalidArgument, "output layer must be a single sigmoid unit");
    MlpModel m;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto& s = specs[k];
      if (s.fan_in == 0 || s.fan_out == 0) throw Error(ErrorCode::InvalidArgument, "empty layer");
      DenseLayer layer;
      layer.activation = s.activation;
      layer.weights.resize(static_cast<Eigen::Index>(s.fan_out), static_cast<Eigen::Index>(s.fan_in));
      layer.bias = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.fan_out), 1);
      const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
      Rng rng = make_rng(seed, 0x1a7e0000 + k);
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
      m.layers_.push_back(std::move(layer));
    }
    return m;
  }

  std::size_t input_dim() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
  }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  /// Parameters in canonical order W0, b0, W1, b1, ...
  std::vector<Eigen::MatrixXd*> parameters() {
    std::vector<Eigen::MatrixXd*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }

  std::vector<const Eigen::MatrixXd*> parameters() const {
    std::vector<const Eigen::MatrixXd*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }

 private:
  std::vector<DenseLayer> layers_;
};

inline constexpr std::size_t kHidden1 = 200;
inline constexpr std::size_t kHidden2 = 100;

/// [2*dim -> 200 relu, 200 -> 100 relu, 100 -> 1 sigmoid].
inline MlpModel build_default_model(std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw Error(ErrorCode::DimTooSmall, "dim must be at least 2");
  const LayerSpec specs[] = {{2 * dim, kHidden1, Activation::Relu},
                             {kHidden1, kHidden2, Activation::Relu},
                             {kHidden2, 1, Activation::Sigmoid}};
  return MlpModel::from_specs(specs, seed);
}

inline constexpr double kProbClamp = 1e-12;

inline double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Binary cross-entropy.
inline double loss(double y_pred, int y_true) {
  const double p = clamp_probability(y_pred);
  return y_true ? -std::log(p) : -std::log1p(-p);
}

namespace detail {

inline void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::Relu)
    z = z.cwiseMax(0.0);
  else
    z = (1.0 + (-z.array()).exp()).inverse().matrix();
}

}  // namespace detail

/// Outputs (clamped to the open unit interval) for a batch of columns.
inline Eigen::RowVectorXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != m.input_dim())
    throw Error(ErrorCode::DimMismatch, "input has " + std::to_string(x.rows()) + " rows, model expects " +
                                            std::to_string(m.input_dim()));
  Eigen::MatrixXd h = x;
  for (const auto& l : m.layers()) {
    Eigen::MatrixXd z = l.weights * h;
    z.colwise() += l.bias.col(0);
    detail::activate(z, l.activation);
    h = std::move(z);
  }
  Eigen::RowVectorXd out = h.row(0);
  for (auto& p : out) p = clamp_probability(p);
  return out;
}

inline double forward(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim())
    throw Error(ErrorCode::DimMismatch, "input length " + std::to_string(x.size()) + ", model expects " +
                                            std::to_string(m.input_dim()));
  const Eigen::Map<const Eigen::MatrixXd> col(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return forward_batch(m, col)(0);
}

/// Gradients in the same order and shapes as MlpModel::parameters().
using Gradients = std::vector<Eigen::MatrixXd>;

struct BackwardResult {
  Gradients grads;
  double mean_loss = 0.0;
};

/// Mean-over-batch gradient of the cross-entropy loss.
/// x: (input_dim x batch), labels: one per column.
inline BackwardResult backward(const MlpModel& m, const Eigen::MatrixXd& x,
                               std::span<const std::uint8_t> labels) {
  const auto batch = x.cols();
  if (batch == 0) throw Error(ErrorCode::EmptyDataset, "empty batch");
  if (static_cast<std::size_t>(x.rows()) != m.input_dim())
    throw Error(ErrorCode::DimMismatch, "batch width does not match model input");
  if (labels.size() != static_cast<std::size_t>(batch))
    throw Error(ErrorCode::DimMismatch, "label count does not match batch size");

  const auto& layers = m.layers();
  const std::size_t n_layers = layers.size();
  std::vector<Eigen::MatrixXd> acts(n_layers + 1);
  acts[0] = x;
  for (std::size_t k = 0; k < n_layers; ++k) {
    Eigen::MatrixXd z;
    z.noalias() = layers[k].weights * acts[k];
    z.colwise() += layers[k].bias.col(0);
    detail::activate(z, layers[k].activation);
    acts[k + 1] = std::move(z);
  }

  BackwardResult out;
  const double inv = 1.0 / static_cast<double>(batch);
  // Sigmoid head with cross-entropy: dL/dz = p - y.
  Eigen::MatrixXd delta(1, batch);
  double total = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double p = acts[n_layers](0, j);
    const int y = labels[static_cast<std::size_t>(j)] ? 1 : 0;
    total += loss(p, y);
    delta(0, j) = (p - y) * inv;
  }
  out.mean_loss = total * inv;

  out.grads.resize(2 * n_layers);
  for (std::size_t k = n_layers; k-- > 0;) {
    out.grads[2 * k].noalias() = delta * acts[k].transpose();
    out.grads[2 * k + 1] = delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd up;
    up.noalias() = layers[k].weights.transpose() * delta;
    const auto& h = acts[k];
    if (layers[k - 1].activation == Activation::Relu)
      up = (h.array() > 0.0).select(up, 0.0);
    else
      up = (up.array() * h.array() * (1.0 - h.array())).matrix();
    delta = std::move(up);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers.

enum class OptimizerKind { Sgd, Adam, Adadelta, Adagrad, Rmsprop };

inline constexpr OptimizerKind kAllOptimizers[] = {OptimizerKind::Adam, OptimizerKind::Adadelta,
                                                   OptimizerKind::Adagrad, OptimizerKind::Rmsprop,
                                                   OptimizerKind::Sgd};

constexpr std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Adadelta: return "adadelta";
    case OptimizerKind::Adagrad: return "adagrad";
    case OptimizerKind::Rmsprop: return "rmsprop";
  }
  return "unknown";
}

inline OptimizerKind parse_optimizer(std::string_view s) {
  for (auto k : kAllOptimizers)
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 0.001;
  double rho = 0.9;      // RMSprop / Adadelta decay
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  static OptimizerConfig defaults(OptimizerKind kind) {
    OptimizerConfig c;
    c.kind = kind;
    switch (kind) {
      case OptimizerKind::Sgd:
      case OptimizerKind::Adagrad: c.learning_rate = 0.01; break;
      case OptimizerKind::Adam:
      case OptimizerKind::Rmsprop: c.learning_rate = 0.001; break;
      case OptimizerKind::Adadelta:
        c.learning_rate = 1.0;
        c.rho = 0.95;
        break;
    }
    return c;
  }
};

struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t steps = 0;
  std::vector<Eigen::MatrixXd> first;   // adam m, adadelta E[g^2], adagrad G, rmsprop E[g^2]
  std::vector<Eigen::MatrixXd> second;  // adam v, adadelta E[dx^2]

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
};

/// One update of every parameter tensor. Accumulators are created lazily
/// with the parameter shapes on the first call.
inline void optimizer_step(OptimizerState& st, std::span<Eigen::MatrixXd* const> params,
                           std::span<const Eigen::MatrixXd> grads) {
  if (params.size() != grads.size()) throw Error(ErrorCode::DimMismatch, "parameter/gradient count");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols())
      throw Error(ErrorCode::DimMismatch, "gradient shape differs from parameter " + std::to_string(i));
  if (st.first.empty()) {
    for (auto* p : params) {
      st.first.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      st.second.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  ++st.steps;
  const auto& c = st.config;
  const double lr = c.learning_rate;
  const double eps = c.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->array();
    const auto g = grads[i].array();
    auto s1 = st.first[i].array();
    auto s2 = st.second[i].array();
    switch (c.kind) {
      case OptimizerKind::Sgd:
        p -= lr * g;
        break;
      case OptimizerKind::Adagrad:
        s1 += g.square();
        p -= lr * g / (s1 + eps).sqrt();
        break;
      case OptimizerKind::Rmsprop:
        s1 = c.rho * s1 + (1.0 - c.rho) * g.square();
        p -= lr * g / (s1.sqrt() + eps);
        break;
      case OptimizerKind::Adadelta: {
        s1 = c.rho * s1 + (1.0 - c.rho) * g.square();
        const Eigen::ArrayXXd delta = ((s2 + eps).sqrt() / (s1 + eps).sqrt()) * g;
        s2 = c.rho * s2 + (1.0 - c.rho) * delta.square();
        p -= lr * delta;
        break;
      }
      case OptimizerKind::Adam: {
        const double t = static_cast<double>(st.steps);
        s1 = c.beta1 * s1 + (1.0 - c.beta1) * g;
        s2 = c.beta2 * s2 + (1.0 - c.beta2) * g.square();
        const double m_hat = 1.0 / (1.0 - std::pow(c.beta1, t));
        const double v_hat = 1.0 / (1.0 - std::pow(c.beta2, t));
        p -= lr * (s1 * m_hat) / ((s2 * v_hat).sqrt() + eps);
        break;
      }
    }
  }
}

inline void optimizer_step(OptimizerState& st, MlpModel& m, const Gradients& grads) {
  const auto params = m.parameters();
  optimizer_step(st, std::span<Eigen::MatrixXd* const>(params), std::span<const Eigen::MatrixXd>(grads));
}

// ---------------------------------------------------------------------------
// Samples and encoding.

struct SampleSet {
  Eigen::MatrixXd inputs;             // input_dim x count
  std::vector<std::uint8_t> labels;   // one per column

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
};

struct Sample {
  std::vector<double> input;
  std::uint8_t label = 0;
};

/// A row becomes two directional samples: (alpha|beta -> maj_ab) and
/// (beta|alpha -> maj_ba).
inline std::pair<Sample, Sample> encode(const DatasetRow& row) {
  Sample ab, ba;
  ab.input.assign(row.alpha.begin(), row.alpha.end());
  ab.input.insert(ab.input.end(), row.beta.begin(), row.beta.end());
  ba.input.assign(row.beta.begin(), row.beta.end());
  ba.input.insert(ba.input.end(), row.alpha.begin(), row.alpha.end());
  ab.label = row.maj_ab;
  ba.label = row.maj_ba;
  return {std::move(ab), std::move(ba)};
}

/// Columns 2i and 2i+1 hold the two samples of row i.
inline SampleSet encode(const Dataset& ds) {
  SampleSet s;
  const auto d = static_cast<Eigen::Index>(ds.dim);
  s.inputs.resize(2 * d, static_cast<Eigen::Index>(2 * ds.size()));
  s.labels.resize(2 * ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.rows[i];
    if (r.alpha.dim() != ds.dim || r.beta.dim() != ds.dim)
      throw Error(ErrorCode::DimInconsistent, "row " + std::to_string(i) + " has the wrong dimension");
    const auto ca = static_cast<Eigen::Index>(2 * i);
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      s.inputs(k, ca) = r.alpha[uk];
      s.inputs(d + k, ca) = r.beta[uk];
      s.inputs(k, ca + 1) = r.beta[uk];
      s.inputs(d + k, ca + 1) = r.alpha[uk];
    }
    s.labels[2 * i] = r.maj_ab;
    s.labels[2 * i + 1] = r.maj_ba;
  }
  return s;
}

/// Only the alpha -> beta direction of each row.
inline SampleSet encode_forward(const Dataset& ds) {
  SampleSet s;
  const auto d = static_cast<Eigen::Index>(ds.dim);
  s.inputs.resize(2 * d, static_cast<Eigen::Index>(ds.size()));
  s.labels.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.rows[i];
    for (Eigen::Index k = 0; k < d; ++k) {
      s.inputs(k, static_cast<Eigen::Index>(i)) = r.alpha[static_cast<std::size_t>(k)];
      s.inputs(d + k, static_cast<Eigen::Index>(i)) = r.beta[static_cast<std::size_t>(k)];
    }
    s.labels[i] = r.maj_ab;
  }
  return s;
}

inline SampleSet select_columns(const SampleSet& s, std::span<const std::size_t> idx) {
  SampleSet out;
  out.inputs.resize(s.inputs.rows(), static_cast<Eigen::Index>(idx.size()));
  out.labels.resize(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.inputs.col(static_cast<Eigen::Index>(j)) = s.inputs.col(static_cast<Eigen::Index>(idx[j]));
    out.labels[j] = s.labels[idx[j]];
  }
  return out;
}

/// Subsamples the majority class down to the minority count. Order of the
/// kept samples is preserved.
inline SampleSet balance_samples(const SampleSet& s, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < s.size(); ++i) (s.labels[i] ? pos : neg).push_back(i);
  auto& major = pos.size() > neg.size() ? pos : neg;
  const auto& minor = pos.size() > neg.size() ? neg : pos;
  Rng rng = make_rng(seed, 0xba1a);
  shuffle(std::span<std::size_t>(major), rng);
  major.resize(minor.size());
  std::vector<std::size_t> keep(pos);
  keep.insert(keep.end(), neg.begin(), neg.end());
  std::sort(keep.begin(), keep.end());
  return select_columns(s, keep);
}

// ---------------------------------------------------------------------------
// Training and evaluation.

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;
};

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  Confusion confusion;
  double duration_seconds = 0.0;
};

/// Class 1 when the output is at least one half.
inline bool predict(double p) { return p >= 0.5; }

struct EvaluateOptions {
  std::size_t jobs = 1;
  std::size_t chunk = 4096;
};

inline Metrics evaluate(const MlpModel& m, const SampleSet& test, EvaluateOptions opts = {}) {
  if (test.empty()) throw Error(ErrorCode::EmptyDataset, "empty test set");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = test.size();
  std::vector<double> probs(n);
  const std::size_t chunks = (n + opts.chunk - 1) / opts.chunk;
  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = c * opts.chunk;
    const std::size_t hi = std::min(n, lo + opts.chunk);
    const auto out = forward_batch(m, test.inputs.middleCols(static_cast<Eigen::Index>(lo),
                                                             static_cast<Eigen::Index>(hi - lo)));
    for (std::size_t i = lo; i < hi; ++i) probs[i] = out(static_cast<Eigen::Index>(i - lo));
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, chunks));
  if (jobs == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += jobs) run_chunk(c);
      });
    for (auto& t : workers) t.join();
  }
  Metrics met;
  double total_loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = test.labels[i] != 0;
    const bool yhat = predict(probs[i]);
    total_loss += loss(probs[i], y);
    if (yhat && y) ++met.confusion.tp;
    else if (yhat && !y) ++met.confusion.fp;
    else if (!yhat && !y) ++met.confusion.tn;
    else ++met.confusion.fn;
  }
  met.accuracy = static_cast<double>(met.confusion.tp + met.confusion.tn) / static_cast<double>(n);
  met.mean_loss = total_loss / static_cast<double>(n);
  met.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return met;
}

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> eval_accuracy;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double wall_seconds = 0.0;  // excludes per-epoch evaluation
};

/// Minibatch training. Single-threaded, so fixed inputs give a bit-identical
/// trajectory. When eval is given, its accuracy is recorded after each epoch.
inline TrainResult train(MlpModel& m, const SampleSet& train_set, const TrainConfig& cfg,
                         const OptimizerConfig& opt, const SampleSet* eval = nullptr) {
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "empty training set");
  if (static_cast<std::size_t>(train_set.inputs.rows()) != m.input_dim())
    throw Error(ErrorCode::DimMismatch, "training inputs do not match model width");
  if (cfg.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");

  TrainResult result;
  OptimizerState state(opt);
  Rng rng = make_rng(cfg.seed, 0x7a1e);
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  Eigen::MatrixXd batch_x(train_set.inputs.rows(), static_cast<Eigen::Index>(cfg.batch_size));
  std::vector<std::uint8_t> batch_y(cfg.batch_size);
  const auto params = m.parameters();
  double train_time = 0.0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.shuffle_each_epoch) shuffle(std::span<std::size_t>(order), rng);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - lo);
      if (static_cast<std::size_t>(batch_x.cols()) != len) batch_x.resize(batch_x.rows(), static_cast<Eigen::Index>(len));
      batch_y.resize(len);
      for (std::size_t j = 0; j < len; ++j) {
        batch_x.col(static_cast<Eigen::Index>(j)) = train_set.inputs.col(static_cast<Eigen::Index>(order[lo + j]));
        batch_y[j] = train_set.labels[order[lo + j]];
      }
      auto bw = backward(m, batch_x, batch_y);
      loss_sum += bw.mean_loss * static_cast<double>(len);
      optimizer_step(state, std::span<Eigen::MatrixXd* const>(params),
                     std::span<const Eigen::MatrixXd>(bw.grads));
    }
    train_time += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(n);
    if (eval) es.eval_accuracy = evaluate(m, *eval).accuracy;
    result.history.push_back(es);
  }
  result.wall_seconds = train_time;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints and fingerprints.

/// FNV-1a over the raw bytes of every parameter, as 16 hex digits.
inline std::string model_checksum(const MlpModel& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* p : m.parameters()) {
    const std::int64_t shape[2] = {p->rows(), p->cols()};
    mix(shape, sizeof shape);
    mix(p->data(), sizeof(double) * static_cast<std::size_t>(p->size()));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Checkpoint {
  MlpModel model;
  std::uint64_t seed = 0;
  TrainConfig train;
  OptimizerConfig optimizer;
};

inline nlohmann::json to_json(const Checkpoint& ck) {
  using nlohmann::json;
  json layers = json::array();
  for (const auto& l : ck.model.layers()) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    json b = json::array();
    for (Eigen::Index r = 0; r < l.bias.rows(); ++r) b.push_back(l.bias(r, 0));
    layers.push_back({{"fan_in", l.weights.cols()},
                      {"fan_out", l.weights.rows()},
                      {"activation", to_string(l.activation)},
                      {"weights", std::move(w)},
                      {"bias", std::move(b)}});
  }
  return {{"format", "entcat-mlp"},
          {"version", 1},
          {"seed", ck.seed},
          {"checksum", model_checksum(ck.model)},
          {"train",
           {{"epochs", ck.train.epochs},
            {"batch_size", ck.train.batch_size},
            {"seed", ck.train.seed},
            {"shuffle_each_epoch", ck.train.shuffle_each_epoch}}},
          {"optimizer",
           {{"kind", to_string(ck.optimizer.kind)},
            {"learning_rate", ck.optimizer.learning_rate},
            {"rho", ck.optimizer.rho},
            {"beta1", ck.optimizer.beta1},
            {"beta2", ck.optimizer.beta2},
            {"epsilon", ck.optimizer.epsilon}}},
          {"layers", std::move(layers)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "entcat-mlp") throw Error(ErrorCode::MalformedRow, "not a model checkpoint");
    Checkpoint ck;
    ck.seed = j.at("seed").get<std::uint64_t>();
    const auto& t = j.at("train");
    ck.train.epochs = t.at("epochs").get<std::size_t>();
    ck.train.batch_size = t.at("batch_size").get<std::size_t>();
    ck.train.seed = t.at("seed").get<std::uint64_t>();
    ck.train.shuffle_each_epoch = t.at("shuffle_each_epoch").get<bool>();
    const auto& o = j.at("optimizer");
    ck.optimizer.kind = parse_optimizer(o.at("kind").get<std::string>());
    ck.optimizer.learning_rate = o.at("learning_rate").get<double>();
    ck.optimizer.rho = o.at("rho").get<double>();
    ck.optimizer.beta1 = o.at("beta1").get<double>();
    ck.optimizer.beta2 = o.at("beta2").get<double>();
    ck.optimizer.epsilon = o.at("epsilon").get<double>();
    std::vector<LayerSpec> specs;
    for (const auto& l : j.at("layers"))
      specs.push_back({l.at("fan_in").get<std::size_t>(), l.at("fan_out").get<std::size_t>(),
                       parse_activation(l.at("activation").get<std::string>())});
    ck.model = MlpModel::from_specs(specs, 0);
    std::size_t k = 0;
    for (const auto& l : j.at("layers")) {
      auto& layer = ck.model.layers()[k++];
      const auto& w = l.at("weights");
      const auto& b = l.at("bias");
      if (static_cast<Eigen::Index>(w.size()) != layer.weights.size() ||
          static_cast<Eigen::Index>(b.size()) != layer.bias.size())
        throw Error(ErrorCode::MalformedRow, "layer parameter count does not match its shape");
      std::size_t idx = 0;
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = w[idx++].get<double>();
      for (Eigen::Index r = 0; r < layer.bias.rows(); ++r) layer.bias(r, 0) = b[static_cast<std::size_t>(r)].get<double>();
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, std::string("bad checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << to_json(ck).dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, std::string("bad checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace entcat
