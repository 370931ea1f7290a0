// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ocpm/autodiff.hpp"
#include "ocpm/dataset.hpp"
#include "ocpm/error.hpp"
#include "ocpm/graph.hpp"

namespace ocpm {

using ag::Matrix;

struct ModelConfig {
  int gat_hidden = 32;
  /// Output width of the third attention layer.
  int embed_dim = 16;
  int attention_heads = 1;
  int lstm_hidden = 100;
  /// Weight of the NE term in the joint loss.
  double loss_weight_ne = 1.0;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 100;
  std::uint64_t seed = 42;
  /// Epochs without improvement before training stops; 0 disables early stopping.
  int patience = 10;
  /// Update only the NE branch (lstm_ne, head_ne); everything feeding next
  /// activity stays fixed. Combine with a warm start and loss_weight_ne = 0
  /// runs to train the two tasks separately.
  bool freeze_na = false;

  void validate() const {
    auto positive = [](int v, const char* key) {
      if (v <= 0) throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be positive");
    };
    positive(gat_hidden, "gat_hidden");
    positive(embed_dim, "embed_dim");
    positive(attention_heads, "attention_heads");
    positive(lstm_hidden, "lstm_hidden");
    positive(batch_size, "batch_size");
    if (epochs < 0) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 0");
    if (patience < 0) throw Error(ErrorKind::InvalidConfig, "patience must be >= 0");
    if (!(loss_weight_ne >= 0.0)) throw Error(ErrorKind::InvalidConfig, "loss_weight_ne must be >= 0");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be > 0");
    if (freeze_na && loss_weight_ne == 0.0) {
      throw Error(ErrorKind::InvalidConfig, "freeze_na with loss_weight_ne = 0 leaves nothing to train");
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Graph-network input derived from an OCDFG. Node features are one-hot
/// identities; every node without an observed self-loop gets one with zero
/// edge features. Edge features are per-type frequencies divided by that
/// type's largest edge frequency.
struct GraphTensors {
  std::size_t num_nodes = 0;
  std::size_t num_types = 0;
  Matrix<double> node_features;
  std::vector<int> source;
  std::vector<int> target;
  Matrix<double> edge_features;

  std::size_t num_edges() const { return source.size(); }
};

inline GraphTensors build_graph_tensors(const Ocdfg& g, const NodeIndex& index) {
  GraphTensors out;
  out.num_nodes = index.size();
  out.num_types = g.object_types.size();
  out.node_features = Matrix<double>::Identity(static_cast<Eigen::Index>(out.num_nodes),
                                               static_cast<Eigen::Index>(out.num_nodes));
  std::vector<std::uint64_t> type_max(out.num_types, 0);
  for (const auto& [edge, freqs] : g.edges) {
    for (std::size_t t = 0; t < freqs.size(); ++t) type_max[t] = std::max(type_max[t], freqs[t]);
  }
  std::vector<bool> has_self(out.num_nodes, false);
  std::vector<std::vector<double>> rows;
  for (const auto& [edge, freqs] : g.edges) {
    const int s = index.at(edge.first);
    const int d = index.at(edge.second);
    if (s == d) has_self[static_cast<std::size_t>(s)] = true;
    out.source.push_back(s);
    out.target.push_back(d);
    std::vector<double> row(out.num_types, 0.0);
    for (std::size_t t = 0; t < freqs.size(); ++t) {
      row[t] = type_max[t] > 0 ? static_cast<double>(freqs[t]) / static_cast<double>(type_max[t]) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  for (std::size_t n = 0; n < out.num_nodes; ++n) {
    if (has_self[n]) continue;
    out.source.push_back(static_cast<int>(n));
    out.target.push_back(static_cast<int>(n));
    rows.emplace_back(out.num_types, 0.0);
  }
  out.edge_features = Matrix<double>::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(out.num_types));
  for (std::size_t e = 0; e < rows.size(); ++e) {
    for (std::size_t t = 0; t < out.num_types; ++t) out.edge_features(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(t)) = rows[e][t];
  }
  return out;
}

template <typename T>
struct GatHead {
  ag::Parameter<T> weight;        // in x out
  ag::Parameter<T> attn_source;   // out x 1
  ag::Parameter<T> attn_target;   // out x 1
  ag::Parameter<T> edge_proj;     // |OT| x 1
};

template <typename T>
struct GatLayer {
  std::vector<GatHead<T>> heads;
  ag::Parameter<T> bias;
};

/// Gate column order: input, forget, cell, output.
template <typename T>
struct LstmLayer {
  ag::Parameter<T> input_weight;   // in x 4H
  ag::Parameter<T> hidden_weight;  // H x 4H
  ag::Parameter<T> bias;           // 1 x 4H
};

template <typename T>
struct Linear {
  ag::Parameter<T> weight;
  ag::Parameter<T> bias;
};

inline constexpr std::size_t kGatLayers = 3;

template <typename T>
struct ModelParameters {
  std::array<GatLayer<T>, kGatLayers> gat;
  LstmLayer<T> lstm_shared;
  LstmLayer<T> lstm_na;
  LstmLayer<T> lstm_ne;
  Linear<T> head_na;
  Linear<T> head_ne;

  /// Visits every parameter in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (auto& layer : gat) {
      for (auto& head : layer.heads) {
        f(head.weight);
        f(head.attn_source);
        f(head.attn_target);
        f(head.edge_proj);
      }
      f(layer.bias);
    }
    for (auto* l : {&lstm_shared, &lstm_na, &lstm_ne}) {
      f(l->input_weight);
      f(l->hidden_weight);
      f(l->bias);
    }
    for (auto* l : {&head_na, &head_ne}) {
      f(l->weight);
      f(l->bias);
    }
  }

  /// Parameters shared with or dedicated to next-activity prediction.
  template <typename F>
  void for_each_na_path(F&& f) {
    for (auto& layer : gat) {
      for (auto& head : layer.heads) {
        f(head.weight);
        f(head.attn_source);
        f(head.attn_target);
        f(head.edge_proj);
      }
      f(layer.bias);
    }
    for (auto* l : {&lstm_shared, &lstm_na}) {
      f(l->input_weight);
      f(l->hidden_weight);
      f(l->bias);
    }
    f(head_na.weight);
    f(head_na.bias);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParameters*>(this)->for_each([&](const ag::Parameter<T>& p) { f(p); });
  }

  void zero_grad() {
    for_each([](ag::Parameter<T>& p) { p.zero_grad(); });
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const ag::Parameter<T>& p) { n += static_cast<std::size_t>(p.value.size()); });
    return n;
  }
};

namespace detail {

template <typename T>
ag::Parameter<T> make_param(std::string name, Eigen::Index rows, Eigen::Index cols) {
  ag::Parameter<T> p{std::move(name), Matrix<T>::Zero(rows, cols), Matrix<T>::Zero(rows, cols)};
  return p;
}

template <typename T>
void glorot(ag::Parameter<T>& p, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(dist(rng));
}

template <typename T>
LstmLayer<T> make_lstm(const std::string& name, Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng) {
  LstmLayer<T> l{make_param<T>(name + ".input_weight", in, 4 * hidden),
                 make_param<T>(name + ".hidden_weight", hidden, 4 * hidden), make_param<T>(name + ".bias", 1, 4 * hidden)};
  glorot(l.input_weight, rng);
  glorot(l.hidden_weight, rng);
  l.bias.value.middleCols(hidden, hidden).setConstant(T(1));
  return l;
}

}  // namespace detail

/// Fresh parameters drawn from a seeded generator; the draw sequence does not
/// depend on T, so float and double models from one seed agree up to rounding.
template <typename T>
ModelParameters<T> init_parameters(const ModelConfig& cfg, std::size_t num_nodes, std::size_t num_types,
                                   std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParameters<T> p;
  const auto heads = static_cast<Eigen::Index>(cfg.attention_heads);
  for (std::size_t l = 0; l < kGatLayers; ++l) {
    const std::string prefix = "gat." + std::to_string(l);
    const Eigen::Index in = l == 0 ? static_cast<Eigen::Index>(num_nodes) : heads * cfg.gat_hidden;
    const Eigen::Index out = l + 1 < kGatLayers ? cfg.gat_hidden : cfg.embed_dim;
    for (Eigen::Index h = 0; h < heads; ++h) {
      const std::string hp = prefix + ".head" + std::to_string(h);
      GatHead<T> head{detail::make_param<T>(hp + ".weight", in, out), detail::make_param<T>(hp + ".attn_source", out, 1),
                      detail::make_param<T>(hp + ".attn_target", out, 1),
                      detail::make_param<T>(hp + ".edge_proj", static_cast<Eigen::Index>(num_types), 1)};
      detail::glorot(head.weight, rng);
      detail::glorot(head.attn_source, rng);
      detail::glorot(head.attn_target, rng);
      detail::glorot(head.edge_proj, rng);
      p.gat[l].heads.push_back(std::move(head));
    }
    p.gat[l].bias = detail::make_param<T>(prefix + ".bias", 1, l + 1 < kGatLayers ? heads * cfg.gat_hidden : cfg.embed_dim);
  }
  const Eigen::Index hidden = cfg.lstm_hidden;
  p.lstm_shared = detail::make_lstm<T>("lstm_shared", cfg.embed_dim + static_cast<Eigen::Index>(kTemporalWidth), hidden, rng);
  p.lstm_na = detail::make_lstm<T>("lstm_na", hidden, hidden, rng);
  p.lstm_ne = detail::make_lstm<T>("lstm_ne", hidden, hidden, rng);
  p.head_na = {detail::make_param<T>("head_na.weight", hidden, static_cast<Eigen::Index>(num_nodes)),
               detail::make_param<T>("head_na.bias", 1, static_cast<Eigen::Index>(num_nodes))};
  p.head_ne = {detail::make_param<T>("head_ne.weight", hidden, 1), detail::make_param<T>("head_ne.bias", 1, 1)};
  detail::glorot(p.head_na.weight, rng);
  detail::glorot(p.head_ne.weight, rng);
  return p;
}

/// Copies parameter values into another scalar type with the same layout.
template <typename To, typename From>
ModelParameters<To> convert_parameters(const ModelParameters<From>& from, const ModelConfig& cfg, std::size_t num_nodes,
                                       std::size_t num_types) {
  auto to = init_parameters<To>(cfg, num_nodes, num_types, 0);
  std::vector<const ag::Parameter<From>*> src;
  from.for_each([&](const ag::Parameter<From>& p) { src.push_back(&p); });
  std::size_t i = 0;
  to.for_each([&](ag::Parameter<To>& p) {
    if (i >= src.size() || src[i]->value.rows() != p.value.rows() || src[i]->value.cols() != p.value.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "parameter layouts differ");
    }
    p.value = src[i++]->value.template cast<To>();
  });
  return to;
}

/// Attention coefficients per layer and head, one E x 1 column each.
template <typename T>
struct AttentionTrace {
  std::vector<std::vector<Matrix<T>>> alpha;
};

template <typename T>
struct SequenceOutputs {
  ag::Var<T> na_logits;  // batch x |A|
  ag::Var<T> ne;         // batch x 1, scaled units
};

inline constexpr double kAttentionSlope = 0.2;

/// Three graph-attention layers producing activity embeddings, followed by a
/// shared LSTM and two task-specific LSTMs with linear heads.
template <typename T>
class GatLstmModel {
 public:
  GatLstmModel(ModelConfig config, std::size_t num_nodes, std::size_t num_types)
      : config_(std::move(config)),
        num_nodes_(num_nodes),
        num_types_(num_types),
        params_(init_parameters<T>(config_, num_nodes, num_types, config_.seed)) {}

  GatLstmModel(ModelConfig config, std::size_t num_nodes, std::size_t num_types, ModelParameters<T> params)
      : config_(std::move(config)), num_nodes_(num_nodes), num_types_(num_types), params_(std::move(params)) {}

  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_types() const { return num_types_; }
  ModelParameters<T>& params() { return params_; }
  const ModelParameters<T>& params() const { return params_; }

  /// Node embeddings, |A| x embed_dim.
  ag::Var<T> gat_forward(ag::Tape<T>& tape, const GraphTensors& graph, AttentionTrace<T>* trace = nullptr) {
    if (graph.num_nodes != num_nodes_ || graph.num_types != num_types_ ||
        graph.edge_features.rows() != static_cast<Eigen::Index>(graph.num_edges()) ||
        graph.target.size() != graph.source.size()) {
      throw Error(ErrorKind::ShapeMismatch, "graph tensors do not match the model (" + std::to_string(graph.num_nodes) +
                                                " nodes, " + std::to_string(graph.num_types) + " types; expected " +
                                                std::to_string(num_nodes_) + ", " + std::to_string(num_types_) + ")");
    }
    const auto n = static_cast<Eigen::Index>(num_nodes_);
    auto edge_features = tape.constant(graph.edge_features.template cast<T>());
    auto h = tape.constant(graph.node_features.template cast<T>());
    if (trace) trace->alpha.assign(kGatLayers, {});
    for (std::size_t l = 0; l < kGatLayers; ++l) {
      auto& layer = params_.gat[l];
      std::vector<ag::Var<T>> outs;
      for (auto& head : layer.heads) {
        auto wh = ag::matmul(h, tape.parameter(head.weight));
        auto score_src = ag::matmul(wh, tape.parameter(head.attn_source));
        auto score_dst = ag::matmul(wh, tape.parameter(head.attn_target));
        auto score_edge = ag::matmul(edge_features, tape.parameter(head.edge_proj));
        auto logits = ag::add(ag::add(ag::gather_rows(score_dst, graph.target), ag::gather_rows(score_src, graph.source)),
                              score_edge);
        logits = ag::leaky_relu(logits, static_cast<T>(kAttentionSlope));
        auto alpha = ag::segment_softmax(logits, graph.target, n);
        if (trace) trace->alpha[l].push_back(alpha.value());
        auto messages = ag::scale_rows(ag::gather_rows(wh, graph.source), alpha);
        outs.push_back(ag::scatter_add_rows(messages, graph.target, n));
      }
      ag::Var<T> combined;
      if (l + 1 < kGatLayers) {
        combined = outs.size() == 1 ? outs[0] : ag::concat_cols<T>(outs);
        h = ag::elu(ag::add_row(combined, tape.parameter(layer.bias)));
      } else {
        combined = outs[0];
        for (std::size_t k = 1; k < outs.size(); ++k) combined = ag::add(combined, outs[k]);
        if (outs.size() > 1) combined = ag::scale(combined, T(1) / static_cast<T>(outs.size()));
        h = ag::add_row(combined, tape.parameter(layer.bias));
      }
    }
    return h;
  }

  /// One B x (embed_dim + 4) input per time step: the embedding row of each
  /// position's activity joined with its temporal features. PAD positions are zero.
  std::vector<ag::Var<T>> match_and_concatenate(ag::Tape<T>& tape, const ag::Var<T>& embeddings,
                                                const Batch<T>& batch) const {
    if (embeddings.rows() != static_cast<Eigen::Index>(num_nodes_)) {
      throw Error(ErrorKind::ShapeMismatch, "embedding table has the wrong number of rows");
    }
    const auto b_size = static_cast<Eigen::Index>(batch.size);
    std::vector<ag::Var<T>> steps;
    steps.reserve(batch.max_len);
    for (std::size_t t = 0; t < batch.max_len; ++t) {
      std::vector<int> idx(batch.size);
      Matrix<T> feats(b_size, static_cast<Eigen::Index>(kTemporalWidth));
      for (std::size_t b = 0; b < batch.size; ++b) {
        const int a = batch.activities[b * batch.max_len + t];
        if (a >= static_cast<int>(num_nodes_) || (a < 0 && a != kPadIndex)) {
          throw Error(ErrorKind::IndexOutOfRange, "activity index " + std::to_string(a) + " out of range");
        }
        idx[b] = a;
        for (std::size_t f = 0; f < kTemporalWidth; ++f) {
          feats(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f)) =
              batch.features[(b * batch.max_len + t) * kTemporalWidth + f];
        }
      }
      const std::array<ag::Var<T>, 2> parts{ag::gather_rows(embeddings, std::move(idx)), tape.constant(std::move(feats))};
      steps.push_back(ag::concat_cols<T>(parts));
    }
    return steps;
  }

  /// Runs the shared and the task LSTMs over the masked steps and reads both
  /// heads at each sequence's last real position.
  SequenceOutputs<T> lstm_forward(ag::Tape<T>& tape, std::span<const ag::Var<T>> inputs, const Batch<T>& batch) {
    const auto expected = static_cast<Eigen::Index>(config_.embed_dim + static_cast<int>(kTemporalWidth));
    if (inputs.size() != batch.max_len) throw Error(ErrorKind::ShapeMismatch, "one input per time step expected");
    for (const auto& x : inputs) {
      if (x.cols() != expected || x.rows() != static_cast<Eigen::Index>(batch.size)) {
        throw Error(ErrorKind::ShapeMismatch, "sequence input has the wrong width");
      }
    }
    auto shared = run_lstm(tape, params_.lstm_shared, inputs, batch);
    auto na = run_lstm(tape, params_.lstm_na, shared, batch);
    auto ne = run_lstm(tape, params_.lstm_ne, shared, batch);
    auto last = [&](std::vector<ag::Var<T>>& seq) {
      return seq.empty() ? tape.constant(Matrix<T>::Zero(static_cast<Eigen::Index>(batch.size), config_.lstm_hidden))
                         : seq.back();
    };
    SequenceOutputs<T> out;
    out.na_logits = ag::add_row(ag::matmul(last(na), tape.parameter(params_.head_na.weight)),
                                tape.parameter(params_.head_na.bias));
    out.ne = ag::add_row(ag::matmul(last(ne), tape.parameter(params_.head_ne.weight)),
                         tape.parameter(params_.head_ne.bias));
    return out;
  }

  /// Mean cross-entropy on NA plus `lambda` times mean absolute error on scaled NE.
  /// With lambda == 0 the NE branch is left out of the graph entirely.
  ag::Var<T> loss(const SequenceOutputs<T>& out, const Batch<T>& batch, double lambda) const {
    auto ce = ag::softmax_cross_entropy(out.na_logits, batch.target_na);
    if (lambda == 0.0) return ce;
    auto mae = ag::mean_absolute_error(out.ne, batch.target_ne);
    return ag::add(ce, ag::scale(mae, static_cast<T>(lambda)));
  }

  /// Full differentiable pipeline from graph and batch to the joint loss.
  ag::Var<T> forward_loss(ag::Tape<T>& tape, const GraphTensors& graph, const Batch<T>& batch) {
    auto emb = gat_forward(tape, graph);
    auto steps = match_and_concatenate(tape, emb, batch);
    auto out = lstm_forward(tape, steps, batch);
    return loss(out, batch, config_.loss_weight_ne);
  }

  /// Embeddings for inference. A graph with a different node count than the
  /// model was trained on is a checkpoint/graph mismatch.
  Matrix<T> embeddings(const GraphTensors& graph) {
    if (graph.num_nodes != num_nodes_ || graph.num_types != num_types_) {
      throw Error(ErrorKind::VersionMismatch, "model expects " + std::to_string(num_nodes_) + " activities and " +
                                                  std::to_string(num_types_) + " object types, graph has " +
                                                  std::to_string(graph.num_nodes) + " and " +
                                                  std::to_string(graph.num_types));
    }
    ag::Tape<T> tape;
    return gat_forward(tape, graph).value();
  }

  struct Prediction {
    Matrix<T> na_logits;
    Matrix<T> ne;
  };

  Prediction predict(const Matrix<T>& embeddings, const Batch<T>& batch) {
    ag::Tape<T> tape;
    auto emb = tape.constant(embeddings);
    auto steps = match_and_concatenate(tape, emb, batch);
    auto out = lstm_forward(tape, steps, batch);
    return {out.na_logits.value(), out.ne.value()};
  }

 private:
  std::vector<ag::Var<T>> run_lstm(ag::Tape<T>& tape, LstmLayer<T>& layer, std::span<const ag::Var<T>> inputs,
                                   const Batch<T>& batch) {
    const auto b_size = static_cast<Eigen::Index>(batch.size);
    const Eigen::Index hidden = config_.lstm_hidden;
    auto wx = tape.parameter(layer.input_weight);
    auto wh = tape.parameter(layer.hidden_weight);
    auto bias = tape.parameter(layer.bias);
    auto h = tape.constant(Matrix<T>::Zero(b_size, hidden));
    auto c = tape.constant(Matrix<T>::Zero(b_size, hidden));
    std::vector<ag::Var<T>> outputs;
    outputs.reserve(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      std::vector<std::uint8_t> mask(batch.size);
      for (std::size_t b = 0; b < batch.size; ++b) mask[b] = batch.mask[b * batch.max_len + t];
      auto gates = ag::add_row(ag::add(ag::matmul(inputs[t], wx), ag::matmul(h, wh)), bias);
      auto in_gate = ag::sigmoid(ag::slice_cols(gates, 0, hidden));
      auto forget_gate = ag::sigmoid(ag::slice_cols(gates, hidden, hidden));
      auto cell_in = ag::tanh(ag::slice_cols(gates, 2 * hidden, hidden));
      auto out_gate = ag::sigmoid(ag::slice_cols(gates, 3 * hidden, hidden));
      auto c_next = ag::add(ag::mul(forget_gate, c), ag::mul(in_gate, cell_in));
      auto h_next = ag::mul(out_gate, ag::tanh(c_next));
      c = ag::select_rows(mask, c_next, c);
      h = ag::select_rows(std::move(mask), h_next, h);
      outputs.push_back(h);
    }
    return outputs;
  }

  ModelConfig config_;
  std::size_t num_nodes_;
  std::size_t num_types_;
  ModelParameters<T> params_;
};

/// Adam with bias correction. Refuses to step when any gradient is non-finite.
template <typename T>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(ModelParameters<T>& params) {
    params.for_each([](const ag::Parameter<T>& p) {
      if (p.grad.size() != 0 && !p.grad.allFinite()) {
        throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient in '" + p.name + "'");
      }
    });
    if (m_.empty()) {
      params.for_each([&](const ag::Parameter<T>& p) {
        m_.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
      });
    }
    ++steps_;
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T correction1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(steps_)));
    const T correction2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(steps_)));
    const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    std::size_t i = 0;
    params.for_each([&](ag::Parameter<T>& p) {
      auto& m = m_[i];
      auto& v = v_[i];
      ++i;
      if (p.grad.size() == 0) return;
      m = b1 * m + (T(1) - b1) * p.grad;
      v = b2 * v + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
    });
  }

  std::uint64_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t steps_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

}  // namespace ocpm
