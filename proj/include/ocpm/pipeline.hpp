// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end commands behind the `ocpm` executable. Each returns normally on
// success and throws ocpm::Error otherwise; messages carry a stage label.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ocpm/checkpoint.hpp"
#include "ocpm/config.hpp"
#include "ocpm/dataset.hpp"
#include "ocpm/error.hpp"
#include "ocpm/flatten.hpp"
#include "ocpm/graph.hpp"
#include "ocpm/model.hpp"
#include "ocpm/ocel.hpp"
#include "ocpm/train.hpp"

namespace ocpm {

inline std::string read_file(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(ErrorKind::Io, "no such file '" + path + "'");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

/// Runs `body`, prefixing any library error with the stage name.
template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(name) + ": " + e.message());
  }
}

inline ObjectCentricEventLog load_log(const std::string& path, bool drop_invalid = false) {
  const auto text = read_file(path);
  return stage("parse", [&] {
    try {
      return parse_ocel(text, ParseOptions{drop_invalid, false});
    } catch (const Error& e) {
      throw Error(e.kind(), path + ": " + e.message());
    }
  });
}

inline std::string log_name(const std::string& path) {
  auto stem = std::filesystem::path(path).filename().string();
  if (const auto dot = stem.find('.'); dot != std::string::npos && dot > 0) stem.erase(dot);
  return stem;
}

inline void cmd_summary(const std::string& path, std::ostream& out, bool drop_invalid = false) {
  const auto log = load_log(path, drop_invalid);
  out << format_summary(log_summary(log));
}

inline void cmd_flatten(const std::string& path, const std::string& type, const std::string& out_path, std::ostream& out) {
  const auto log = load_log(path);
  const auto fl = stage("flatten", [&] { return flatten(log, type); });
  std::ostringstream csv;
  write_flattened_csv(fl, csv);
  if (out_path.empty() || out_path == "-") {
    out << csv.str();
  } else {
    write_file(out_path, csv.str());
    out << "flattened '" << type << "': " << fl.events.size() << " events, " << fl.cases.size() << " cases -> "
        << out_path << '\n';
  }
}

inline std::vector<std::string> resolve_types(const ObjectCentricEventLog& log, const std::vector<std::string>& types) {
  if (types.empty()) return {log.object_types().begin(), log.object_types().end()};
  for (const auto& t : types) {
    if (!log.has_type(t)) throw Error(ErrorKind::UnknownObjectType, "object type '" + t + "' not in log");
  }
  return types;
}

inline void cmd_discover(const std::string& path, const std::vector<std::string>& types, const std::string& format,
                         const std::string& out_path, std::uint64_t min_freq, std::ostream& out) {
  if (format != "json" && format != "dot") throw Error(ErrorKind::InvalidConfig, "format must be 'json' or 'dot'");
  const auto log = load_log(path);
  const auto graph = stage("discover", [&] {
    return filter_min_frequency(discover_ocdfg(log, resolve_types(log, types)), min_freq);
  });
  const auto doc = format == "json" ? export_json(graph) : export_dot(graph);
  if (out_path.empty() || out_path == "-") {
    out << doc;
  } else {
    write_file(out_path, doc);
    out << "ocdfg: " << graph.activities.size() << " nodes, " << graph.edges.size() << " edges, "
        << graph.object_types.size() << " object types -> " << out_path << '\n';
  }
}

inline Checkpoint<float> load_checkpoint_file(const std::string& path) {
  const auto bytes = read_file(path);
  return stage("checkpoint", [&] { return load_model<float>(bytes); });
}

struct TrainOutcome {
  TrainRun<float> run;
  std::optional<EvalReport> report;
  std::filesystem::path output_dir;
};

inline std::string resolve_output_dir(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "ocpm-out";
}

/// Parses, discovers the OCDFG, builds the prefix dataset, trains, evaluates
/// on the test split and writes model.ckpt, history.csv, metrics.{csv,json}
/// and effective_config.txt into the output directory.
inline TrainOutcome cmd_train(RunConfig config, std::ostream& out, bool verbose = false) {
  stage("config", [&] { validate(config); });
  config.output_dir = resolve_output_dir(config.output_dir);
  const auto log = load_log(config.input, config.drop_invalid);

  const auto types = stage("config", [&] {
    auto t = resolve_types(log, config.types);
    if (!log.has_type(config.target)) throw Error(ErrorKind::UnknownObjectType, "target type '" + config.target + "' not in log");
    return t;
  });
  const auto ocdfg = stage("discover", [&] { return filter_min_frequency(discover_ocdfg(log, types), config.min_freq); });
  const NodeIndex index(ocdfg.activities);
  const auto graph = build_graph_tensors(ocdfg, index);

  auto dataset = stage("dataset", [&] {
    const auto fl = flatten(log, config.target);
    return split_by_case(build_prefixes(fl, index), index, config.ratios, config.model.seed, config.max_len);
  });
  const auto train_raw = dataset.subset(Split::Train);
  const auto val_raw = dataset.subset(Split::Validation);
  const auto test_raw = dataset.subset(Split::Test);
  const auto scaling = stage("dataset", [&] { return fit_scaling(train_raw); });
  auto prepare = [&](const std::vector<PrefixSample>& raw) {
    std::vector<ScaledSample> s;
    s.reserve(raw.size());
    for (const auto& r : raw) s.push_back(truncate_to_recent(apply_scaling(r, scaling), dataset.max_len));
    return s;
  };
  const auto train_set = prepare(train_raw);
  const auto val_set = prepare(val_raw);

  out << "target '" << config.target << "': " << dataset.samples.size() << " prefixes (" << train_set.size() << " train, "
      << val_set.size() << " validation, " << test_raw.size() << " test), " << index.size() << " activities, "
      << graph.num_edges() << " graph edges, max_len " << dataset.max_len << '\n';

  GatLstmModel<float> model = [&] {
    if (config.init_from.empty()) return GatLstmModel<float>(config.model, index.size(), ocdfg.object_types.size());
    auto start = load_checkpoint_file(config.init_from);
    const auto& a = start.config;
    const auto& b = config.model;
    if (start.node_index.labels() != index.labels() || start.object_types != ocdfg.object_types ||
        a.gat_hidden != b.gat_hidden || a.embed_dim != b.embed_dim || a.attention_heads != b.attention_heads ||
        a.lstm_hidden != b.lstm_hidden) {
      throw Error(ErrorKind::VersionMismatch,
                  "init_from: checkpoint '" + config.init_from + "' has a different graph or layer sizes");
    }
    return GatLstmModel<float>(config.model, index.size(), ocdfg.object_types.size(), std::move(start.params));
  }();
  EpochCallback progress;
  if (verbose) {
    progress = [&](const EpochRecord& r) {
      out << "epoch " << r.epoch << " loss " << r.train_loss << " acc " << r.na_accuracy << " mae_days " << r.ne_mae_days
          << '\n';
    };
  }
  TrainOutcome outcome;
  outcome.run = stage("train", [&] { return train(model, graph, std::span(train_set), std::span(val_set), scaling, progress); });

  if (!test_raw.empty()) {
    outcome.report = stage("evaluate", [&] { return evaluate(model, graph, std::span(test_raw), scaling, dataset.max_len); });
    outcome.report->log_name = log_name(config.input);
    outcome.report->object_type = config.target;
  }

  const std::filesystem::path dir = config.output_dir;
  outcome.output_dir = dir;
  Checkpoint<float> ckpt{config.model, index, ocdfg.object_types, scaling, graph,
                         DatasetMeta{config.target, config.ratios, config.model.seed, dataset.max_len}, model.params()};
  stage("write", [&] {
    write_file(dir / "effective_config.txt", format_config(config));
    write_file(dir / "model.ckpt", save_model(ckpt));
    write_file(dir / "history.csv", history_csv(outcome.run.history));
    std::vector<EvalReport> reports;
    if (outcome.report) reports.push_back(*outcome.report);
    const auto table = metrics_table(reports);
    write_file(dir / "metrics.csv", table.csv);
    write_file(dir / "metrics.json", metrics_json(reports));
    if (!outcome.run.history.empty()) {
      const auto& best = outcome.run.history.at(static_cast<std::size_t>(outcome.run.best_epoch - 1));
      out << "trained " << outcome.run.history.size() << " epochs, kept epoch " << best.epoch << ": train NA accuracy "
          << best.na_accuracy << ", train NE MAE " << best.ne_mae_days << " days\n";
    }
    if (outcome.report) {
      out << table.text;
    } else {
      out << "no test split; metrics files are empty\n";
    }
  });
  return outcome;
}

/// Rebuilds scaled prefixes for `type` against a checkpoint's activity index.
inline std::vector<PrefixSample> checkpoint_prefixes(const ObjectCentricEventLog& log, const std::string& type,
                                                     const NodeIndex& index) {
  const auto fl = stage("flatten", [&] { return flatten(log, type); });
  for (const auto& e : fl.events) {
    if (!index.find(e.activity)) {
      throw Error(ErrorKind::VersionMismatch, "checkpoint has no node for activity '" + e.activity + "'");
    }
  }
  return stage("dataset", [&] { return build_prefixes(fl, index); });
}

/// Writes one CSV row per prefix: case_id, prefix_length, predicted_activity,
/// probability, predicted_next_days (clamped at 0). `full_dist` appends one
/// probability column per activity.
inline std::size_t cmd_predict(const std::string& checkpoint_path, const std::string& log_path, std::string type,
                               const std::string& out_path, bool full_dist, std::ostream& out) {
  auto ckpt = load_checkpoint_file(checkpoint_path);
  if (type.empty()) type = ckpt.meta.object_type;
  const auto log = load_log(log_path);
  const auto raw = checkpoint_prefixes(log, type, ckpt.node_index);
  std::vector<ScaledSample> scaled;
  scaled.reserve(raw.size());
  for (const auto& r : raw) scaled.push_back(truncate_to_recent(apply_scaling(r, ckpt.scaling), ckpt.meta.max_len));

  GatLstmModel<float> model(ckpt.config, ckpt.node_index.size(), ckpt.graph.num_types, std::move(ckpt.params));
  const auto preds = stage("predict", [&] {
    const auto emb = model.embeddings(ckpt.graph);
    return predict_samples(model, emb, std::span<const ScaledSample>(scaled),
                           static_cast<std::size_t>(ckpt.config.batch_size), full_dist);
  });

  std::ostringstream csv;
  csv << "case_id,prefix_length,predicted_activity,probability,predicted_next_days";
  if (full_dist) {
    for (const auto& label : ckpt.node_index.labels()) csv << ",p:" << detail::csv_field(label);
  }
  csv << '\n';
  char buf[64];
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& p = preds[i];
    csv << detail::csv_field(raw[i].case_id) << ',' << raw[i].activities.size() << ','
        << detail::csv_field(ckpt.node_index.label(p.activity)) << ',';
    std::snprintf(buf, sizeof buf, "%.9g", p.probability);
    csv << buf << ',';
    std::snprintf(buf, sizeof buf, "%.9g", unscale_next_event(std::max(0.0, p.ne_scaled), ckpt.scaling) / kSecondsPerDay);
    csv << buf;
    for (double q : p.distribution) {
      std::snprintf(buf, sizeof buf, ",%.9g", q);
      csv << buf;
    }
    csv << '\n';
  }
  if (out_path.empty() || out_path == "-") {
    out << csv.str();
  } else {
    write_file(out_path, csv.str());
    out << raw.size() << " predictions -> " << out_path << '\n';
  }
  return raw.size();
}

/// Recreates the checkpoint's case split on `log_path` and scores its test part.
inline EvalReport cmd_evaluate(const std::string& checkpoint_path, const std::string& log_path,
                               const std::string& output_dir, std::ostream& out) {
  auto ckpt = load_checkpoint_file(checkpoint_path);
  const auto log = load_log(log_path);
  const auto raw = checkpoint_prefixes(log, ckpt.meta.object_type, ckpt.node_index);
  const auto dataset = split_by_case(raw, ckpt.node_index, ckpt.meta.ratios, ckpt.meta.split_seed, ckpt.meta.max_len);
  const auto test = dataset.subset(Split::Test);
  GatLstmModel<float> model(ckpt.config, ckpt.node_index.size(), ckpt.graph.num_types, std::move(ckpt.params));
  auto report = stage("evaluate", [&] { return evaluate(model, ckpt.graph, std::span(test), ckpt.scaling, ckpt.meta.max_len); });
  report.log_name = log_name(log_path);
  report.object_type = ckpt.meta.object_type;
  const std::vector<EvalReport> reports{report};
  const auto table = metrics_table(reports);
  out << table.text;
  if (!output_dir.empty()) {
    write_file(std::filesystem::path(output_dir) / "metrics.csv", table.csv);
    write_file(std::filesystem::path(output_dir) / "metrics.json", metrics_json(reports));
  }
  return report;
}

}  // namespace ocpm
