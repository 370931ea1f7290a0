// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocpm/dataset.hpp"
#include "ocpm/error.hpp"
#include "ocpm/model.hpp"

namespace ocpm {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;
  /// NA accuracy and NE MAE (days) on the training split after the epoch.
  double na_accuracy = 0.0;
  double ne_mae_days = 0.0;
};

template <typename T>
struct TrainRun {
  ModelConfig config;
  std::vector<EpochRecord> history;
  /// Epoch (1-based) whose parameters were kept; 0 when nothing was trained.
  int best_epoch = 0;
  std::uint64_t seed = 0;
};

/// Lowest index wins ties.
template <typename Row>
int argmax(const Row& row) {
  int best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = static_cast<int>(k);
  }
  return best;
}

struct SamplePrediction {
  int activity = 0;
  double probability = 0.0;
  std::vector<double> distribution;
  /// Model output in scaled NE units (unclamped).
  double ne_scaled = 0.0;
};

/// Runs inference in batches, padding each batch to its longest prefix.
template <typename T>
std::vector<SamplePrediction> predict_samples(GatLstmModel<T>& model, const Matrix<T>& embeddings,
                                              std::span<const ScaledSample> samples, std::size_t batch_size,
                                              bool keep_distribution = false) {
  std::vector<SamplePrediction> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const auto chunk = samples.subspan(begin, std::min(batch_size, samples.size() - begin));
    std::size_t longest = 0;
    for (const auto& s : chunk) longest = std::max(longest, s.activities.size());
    const auto batch = pad_batch<T>(chunk, longest);
    const auto pred = model.predict(embeddings, batch);
    const Matrix<T> probs = ag::softmax_rows<T>(pred.na_logits);
    for (Eigen::Index b = 0; b < probs.rows(); ++b) {
      SamplePrediction p;
      p.activity = argmax(probs.row(b));
      p.probability = static_cast<double>(probs(b, p.activity));
      if (keep_distribution) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k) p.distribution.push_back(static_cast<double>(probs(b, k)));
      }
      p.ne_scaled = static_cast<double>(pred.ne(b, 0));
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct F1Scores {
  double weighted = 0.0;
  double macro = 0.0;
};

/// Per-class F1 over the classes present in either sequence. The weighted
/// average uses true-class support, so classes absent from the truth drop out.
inline F1Scores f1_scores(std::span<const int> predicted, std::span<const int> truth) {
  std::map<int, std::size_t> tp, fp, fn, support;
  std::set<int> classes;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    classes.insert(truth[i]);
    classes.insert(predicted[i]);
    ++support[truth[i]];
    if (predicted[i] == truth[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  F1Scores out;
  if (truth.empty()) return out;
  double weighted = 0.0, macro = 0.0;
  for (int c : classes) {
    const double denom = 2.0 * double(tp[c]) + double(fp[c]) + double(fn[c]);
    const double f1 = denom > 0 ? 2.0 * double(tp[c]) / denom : 0.0;
    weighted += f1 * double(support[c]);
    macro += f1;
  }
  out.weighted = weighted / double(truth.size());
  out.macro = macro / double(classes.size());
  return out;
}

inline double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth) {
  if (truth.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) total += std::abs(predicted[i] - truth[i]);
  return total / static_cast<double>(truth.size());
}

struct EvalReport {
  std::string log_name;
  std::string object_type;
  double na_accuracy = 0.0;
  double na_f1 = 0.0;
  double na_f1_macro = 0.0;
  double ne_mae_days = 0.0;
  std::size_t samples = 0;
};

/// Test-split metrics. NE predictions are clamped at zero, unscaled and
/// reported in days.
template <typename T>
EvalReport evaluate(GatLstmModel<T>& model, const GraphTensors& graph, std::span<const PrefixSample> test,
                    const ScalingStats& scaling, std::size_t max_len) {
  if (test.empty()) throw Error(ErrorKind::EmptyTestSplit, "no test samples to evaluate");
  std::vector<ScaledSample> scaled;
  scaled.reserve(test.size());
  for (const auto& s : test) scaled.push_back(truncate_to_recent(apply_scaling(s, scaling), max_len));
  const auto emb = model.embeddings(graph);
  const auto preds = predict_samples(model, emb, std::span<const ScaledSample>(scaled),
                                     static_cast<std::size_t>(model.config().batch_size));
  std::vector<int> predicted, truth;
  std::vector<double> ne_pred, ne_true;
  for (std::size_t i = 0; i < test.size(); ++i) {
    predicted.push_back(preds[i].activity);
    truth.push_back(test[i].target_na);
    ne_pred.push_back(unscale_next_event(std::max(0.0, preds[i].ne_scaled), scaling) / kSecondsPerDay);
    ne_true.push_back(test[i].target_ne / kSecondsPerDay);
  }
  EvalReport report;
  report.na_accuracy = accuracy(predicted, truth);
  const auto f1 = f1_scores(predicted, truth);
  report.na_f1 = f1.weighted;
  report.na_f1_macro = f1.macro;
  report.ne_mae_days = mean_absolute_error(ne_pred, ne_true);
  report.samples = test.size();
  return report;
}

namespace detail {

template <typename T>
struct PassStats {
  double loss = 0.0;
  double accuracy = 0.0;
  double ne_mae_days = 0.0;
};

/// Loss and metrics over a whole split with fixed parameters.
template <typename T>
PassStats<T> score_split(GatLstmModel<T>& model, const GraphTensors& graph, std::span<const ScaledSample> samples,
                         const ScalingStats& scaling) {
  PassStats<T> stats;
  if (samples.empty()) return stats;
  const auto emb = model.embeddings(graph);
  const auto preds = predict_samples(model, emb, samples, static_cast<std::size_t>(model.config().batch_size), true);
  double ce = 0.0, mae = 0.0, mae_days = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = preds[i];
    ce -= std::log(std::max(p.distribution[static_cast<std::size_t>(samples[i].target_na)], 1e-300));
    mae += std::abs(p.ne_scaled - samples[i].target_ne);
    mae_days += std::abs(unscale_next_event(std::max(0.0, p.ne_scaled), scaling) -
                         unscale_next_event(samples[i].target_ne, scaling)) / kSecondsPerDay;
    hits += p.activity == samples[i].target_na;
  }
  const double n = static_cast<double>(samples.size());
  stats.loss = ce / n + model.config().loss_weight_ne * mae / n;
  stats.accuracy = static_cast<double>(hits) / n;
  stats.ne_mae_days = mae_days / n;
  return stats;
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with a seeded per-epoch shuffle and Adam. The model
/// ends up holding the parameters of the best epoch (validation loss when a
/// validation split exists, training loss otherwise).
template <typename T>
TrainRun<T> train(GatLstmModel<T>& model, const GraphTensors& graph, std::span<const ScaledSample> train_samples,
                  std::span<const ScaledSample> validation_samples, const ScalingStats& scaling,
                  const EpochCallback& on_epoch = {}) {
  const auto& cfg = model.config();
  cfg.validate();
  TrainRun<T> run;
  run.config = cfg;
  run.seed = cfg.seed;
  if (train_samples.empty()) throw Error(ErrorKind::EmptyDataset, "no training samples");
  if (cfg.epochs == 0) return run;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam<T> optimizer(cfg.learning_rate);
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  double best_metric = std::numeric_limits<double>::infinity();
  ModelParameters<T> best = model.params();
  int stale = 0;
  std::vector<ScaledSample> chunk;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      chunk.clear();
      std::size_t longest = 0;
      for (std::size_t i = begin; i < std::min(order.size(), begin + batch_size); ++i) {
        chunk.push_back(train_samples[order[i]]);
        longest = std::max(longest, chunk.back().activities.size());
      }
      const auto batch = pad_batch<T>(chunk, longest);
      model.params().zero_grad();
      ag::Tape<T> tape;
      auto loss = model.forward_loss(tape, graph, batch);
      if (!std::isfinite(static_cast<double>(loss.value()(0, 0)))) {
        throw Error(ErrorKind::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      if (cfg.freeze_na) model.params().for_each_na_path([](ag::Parameter<T>& p) { p.grad.setZero(); });
      optimizer.step(model.params());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const auto train_stats = detail::score_split(model, graph, train_samples, scaling);
    rec.train_loss = train_stats.loss;
    rec.na_accuracy = train_stats.accuracy;
    rec.ne_mae_days = train_stats.ne_mae_days;
    if (!validation_samples.empty()) rec.validation_loss = detail::score_split(model, graph, validation_samples, scaling).loss;
    run.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const double metric = rec.validation_loss.value_or(rec.train_loss);
    if (metric < best_metric) {
      best_metric = metric;
      best = model.params();
      run.best_epoch = epoch;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  model.params() = std::move(best);
  return run;
}

/// "77.4(73.6)": accuracy and F1 as percentages with one decimal.
inline std::string format_accuracy_cell(double accuracy, double f1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f(%.1f)", accuracy * 100.0, f1 * 100.0);
  return buf;
}

inline std::string format_mae_cell(double days) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", days);
  return buf;
}

struct MetricsTable {
  std::string text;
  std::string csv;
};

inline MetricsTable metrics_table(std::span<const EvalReport> reports) {
  MetricsTable out;
  std::size_t log_w = 9, type_w = 11;
  for (const auto& r : reports) {
    log_w = std::max(log_w, r.log_name.size());
    type_w = std::max(type_w, r.object_type.size());
  }
  std::ostringstream text, csv;
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  text << pad("event log", log_w) << "  " << pad("object type", type_w) << "  " << pad("NA acc(F1) %", 14)
       << "NE MAE (days)\n";
  csv << "log,object_type,na_accuracy,na_f1_weighted,na_f1_macro,ne_mae_days,samples,na_cell,ne_cell\n";
  char num[64];
  auto fixed = [&](double v) {
    std::snprintf(num, sizeof num, "%.6f", v);
    return std::string(num);
  };
  for (const auto& r : reports) {
    const auto na_cell = format_accuracy_cell(r.na_accuracy, r.na_f1);
    const auto ne_cell = format_mae_cell(r.ne_mae_days);
    text << pad(r.log_name, log_w) << "  " << pad(r.object_type, type_w) << "  " << pad(na_cell, 14) << ne_cell << '\n';
    csv << r.log_name << ',' << r.object_type << ',' << fixed(r.na_accuracy) << ',' << fixed(r.na_f1) << ','
        << fixed(r.na_f1_macro) << ',' << fixed(r.ne_mae_days) << ',' << r.samples << ',' << na_cell << ',' << ne_cell
        << '\n';
  }
  out.text = text.str();
  out.csv = csv.str();
  return out;
}

inline std::string metrics_json(std::span<const EvalReport> reports) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : reports) {
    doc.push_back({{"log", r.log_name},
                   {"object_type", r.object_type},
                   {"na_accuracy", r.na_accuracy},
                   {"na_f1_weighted", r.na_f1},
                   {"na_f1_macro", r.na_f1_macro},
                   {"ne_mae_days", r.ne_mae_days},
                   {"samples", r.samples},
                   {"na_cell", format_accuracy_cell(r.na_accuracy, r.na_f1)},
                   {"ne_cell", format_mae_cell(r.ne_mae_days)}});
  }
  return doc.dump(2) + "\n";
}

inline std::string history_csv(std::span<const EpochRecord> history) {
  std::ostringstream out;
  out << "epoch,train_loss,validation_loss,na_accuracy,ne_mae_days\n";
  char buf[256], val[64] = "";
  for (const auto& h : history) {
    val[0] = '\0';
    if (h.validation_loss) std::snprintf(val, sizeof val, "%.9g", *h.validation_loss);
    std::snprintf(buf, sizeof buf, "%d,%.9g,%s,%.9g,%.9g\n", h.epoch, h.train_loss, val, h.na_accuracy, h.ne_mae_days);
    out << buf;
  }
  return out.str();
}

}  // namespace ocpm
