// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: summary, flatten, discover, train, predict, evaluate.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocpm/ocpm.hpp"

namespace {

// Flag name -> config key for the train command. Flags are applied after the
// config file so they take precedence.
const std::vector<std::pair<std::string, std::string>> kTrainFlags = {
    {"--input", "input"},
    {"--types", "types"},
    {"--target", "target"},
    {"--gat-hidden", "gat_hidden"},
    {"--embed-dim", "embed_dim"},
    {"--heads", "attention_heads"},
    {"--lstm-hidden", "lstm_hidden"},
    {"--lambda", "loss_weight_ne"},
    {"--lr", "learning_rate"},
    {"--batch-size", "batch_size"},
    {"--epochs", "epochs"},
    {"--seed", "seed"},
    {"--patience", "patience"},
    {"--train-ratio", "train_ratio"},
    {"--validation-ratio", "validation_ratio"},
    {"--test-ratio", "test_ratio"},
    {"--max-len", "max_len"},
    {"--min-freq", "min_freq"},
    {"--output-dir", "output_dir"},
    {"--init-from", "init_from"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric next-activity / next-event-time prediction with graph attention and LSTMs"};
  app.require_subcommand(1);

  std::string log_path;
  bool drop_invalid = false;
  auto* summary = app.add_subcommand("summary", "Print event/object/type/activity counts of a JSON-OCEL log");
  summary->add_option("log", log_path, "JSON-OCEL file")->required();
  summary->add_flag("--drop-invalid", drop_invalid, "Drop events with empty or dangling object maps");

  std::string flatten_type, out_path;
  auto* flatten_cmd = app.add_subcommand("flatten", "Flatten a log onto one object type and export CSV");
  flatten_cmd->add_option("log", log_path, "JSON-OCEL file")->required();
  flatten_cmd->add_option("--type", flatten_type, "Object type")->required();
  flatten_cmd->add_option("-o,--out", out_path, "Output CSV (default: stdout)");

  std::string types_csv, format = "json";
  std::uint64_t min_freq = 0;
  auto* discover = app.add_subcommand("discover", "Discover the object-centric directly-follows graph");
  discover->add_option("log", log_path, "JSON-OCEL file")->required();
  discover->add_option("--types", types_csv, "Comma-separated object types (default: all)");
  discover->add_option("--format", format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  discover->add_option("-o,--out", out_path, "Output file (default: stdout)");
  discover->add_option("--min-freq", min_freq, "Drop edges whose every per-type frequency is below this");

  std::string config_path;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> flag_values;
  bool verbose = false, train_drop_invalid = false, freeze_na = false;
  auto* train = app.add_subcommand("train", "Discover, build prefixes, train, evaluate and write model + metrics");
  train->add_option("-c,--config", config_path, "Config file (key = value lines)");
  for (const auto& [flag, key] : kTrainFlags) train->add_option(flag, flag_values[key], "config key '" + key + "'");
  train->add_option("--set", overrides, "Extra key=value settings, applied last");
  train->add_flag("--drop-invalid", train_drop_invalid, "Drop events with empty or dangling object maps");
  train->add_flag("--freeze-na", freeze_na, "Train only the next-event-time branch");
  train->add_flag("-v,--verbose", verbose, "Print per-epoch progress");

  std::string checkpoint_path, predict_type;
  bool full_dist = false;
  auto* predict = app.add_subcommand("predict", "Predict next activity and time for every prefix of a log");
  predict->add_option("checkpoint", checkpoint_path, "Model checkpoint")->required();
  predict->add_option("log", log_path, "JSON-OCEL file")->required();
  predict->add_option("--type", predict_type, "Object type (default: the checkpoint's target type)");
  predict->add_option("-o,--out", out_path, "Output CSV (default: stdout)");
  predict->add_flag("--full-dist", full_dist, "Append the full next-activity distribution");

  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split of a log");
  evaluate->add_option("checkpoint", checkpoint_path, "Model checkpoint")->required();
  evaluate->add_option("log", log_path, "JSON-OCEL file")->required();
  evaluate->add_option("-o,--output-dir", eval_out, "Directory for metrics.csv / metrics.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (summary->parsed()) {
      ocpm::cmd_summary(log_path, std::cout, drop_invalid);
    } else if (flatten_cmd->parsed()) {
      ocpm::cmd_flatten(log_path, flatten_type, out_path, std::cout);
    } else if (discover->parsed()) {
      ocpm::cmd_discover(log_path, ocpm::detail::split_list(types_csv), format, out_path, min_freq, std::cout);
    } else if (train->parsed()) {
      ocpm::RunConfig config;
      if (!config_path.empty()) ocpm::apply_config_file(config, config_path);
      for (const auto& [flag, key] : kTrainFlags) {
        if (train->count(flag) > 0) ocpm::apply_setting(config, key, flag_values[key]);
      }
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ocpm::Error(ocpm::ErrorKind::InvalidConfig, "--set expects key=value");
        ocpm::apply_setting(config, ocpm::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
      }
      if (train_drop_invalid) config.drop_invalid = true;
      if (freeze_na) config.model.freeze_na = true;
      ocpm::cmd_train(config, std::cout, verbose);
    } else if (predict->parsed()) {
      ocpm::cmd_predict(checkpoint_path, log_path, predict_type, out_path, full_dist, std::cout);
    } else if (evaluate->parsed()) {
      ocpm::cmd_evaluate(checkpoint_path, log_path, eval_out, std::cout);
    }
  } catch (const ocpm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ocpm::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
