// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "ocpm/pipeline.hpp"
#include "support/paths.hpp"

namespace ocpm {
namespace {

using testing::scratch_dir;
using testing::toy_log;

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

RunConfig quick_config(const std::filesystem::path& out) {
  RunConfig c;
  apply_config_file(c, testing::toy_config());
  c.input = toy_log();
  c.model.epochs = 3;
  c.output_dir = out.string();
  return c;
}

TEST(CmdSummary, ToyLogCounts) {
  std::ostringstream out;
  cmd_summary(toy_log(), out);
  EXPECT_NE(out.str().find("events:        90"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("object types:  2"), std::string::npos);
}

TEST(CmdSummary, MissingFileIsIoError) {
  std::ostringstream out;
  try {
    cmd_summary("/nonexistent.jsonocel", out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(CmdDiscover, MinFreqFilterAndFileOutput) {
  const auto dir = scratch_dir("discover");
  std::ostringstream out;
  cmd_discover(toy_log(), {"item", "order"}, "json", (dir / "g.json").string(), 11, out);
  const auto g = import_json(read_file((dir / "g.json").string()));
  EXPECT_FALSE(g.edges.empty());
  for (const auto& [edge, f] : g.edges) EXPECT_TRUE(std::any_of(f.begin(), f.end(), [](auto x) { return x >= 11; }));
  EXPECT_NE(out.str().find("ocdfg:"), std::string::npos);
  std::ostringstream dot;
  cmd_discover(toy_log(), {"order"}, "dot", "", 0, dot);
  EXPECT_EQ(dot.str().rfind("digraph", 0), 0u);
  EXPECT_THROW(cmd_discover(toy_log(), {"truck"}, "json", "", 0, dot), Error);
}

TEST(CmdTrain, MissingTargetFailsBeforeReadingTheLog) {
  RunConfig c;
  c.input = "/nonexistent.jsonocel";
  std::ostringstream out;
  try {
    cmd_train(c, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
    EXPECT_EQ(std::string(e.what()).rfind("InvalidConfig: config:", 0), 0u) << e.what();
  }
}

TEST(CmdTrain, WritesArtifactsAndPredictEvaluateReuseThem) {
  const auto dir = scratch_dir("train");
  std::ostringstream out;
  const auto outcome = cmd_train(quick_config(dir), out);
  for (const char* f : {"model.ckpt", "history.csv", "metrics.csv", "metrics.json", "effective_config.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  ASSERT_TRUE(outcome.report.has_value());
  EXPECT_EQ(csv_lines(read_file((dir / "history.csv").string())).size(), 4u);

  RunConfig echoed;
  apply_config_file(echoed, (dir / "effective_config.txt").string());
  EXPECT_EQ(echoed.model, quick_config(dir).model);

  std::ostringstream pred_out;
  const auto rows = cmd_predict((dir / "model.ckpt").string(), toy_log(), "", (dir / "pred.csv").string(), true, pred_out);
  EXPECT_EQ(rows, 70u);
  const auto lines = csv_lines(read_file((dir / "pred.csv").string()));
  ASSERT_EQ(lines.size(), 71u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> cells;
    std::stringstream row(lines[i]);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 5u + 7u);
    const double prob = std::stod(cells[3]);
    EXPECT_GT(prob, 0.0);
    EXPECT_LE(prob, 1.0);
    EXPECT_GE(std::stod(cells[4]), 0.0);
    double total = 0.0;
    for (std::size_t k = 5; k < cells.size(); ++k) total += std::stod(cells[k]);
    EXPECT_NEAR(total, 1.0, 1e-6);
  }

  std::ostringstream eval_out;
  const auto report = cmd_evaluate((dir / "model.ckpt").string(), toy_log(), (dir / "eval").string(), eval_out);
  EXPECT_EQ(report.samples, outcome.report->samples);
  EXPECT_EQ(report.na_accuracy, outcome.report->na_accuracy);
  EXPECT_EQ(read_file((dir / "eval" / "metrics.csv").string()), read_file((dir / "metrics.csv").string()));
}

TEST(CmdPredict, UnknownActivityIsVersionMismatch) {
  const auto dir = scratch_dir("predict");
  std::ostringstream out;
  cmd_train(quick_config(dir), out);
  auto text = read_file(toy_log());
  const auto at = text.find("\"Deliver\"");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 9, "\"Refund\" ");
  write_file(dir / "other.jsonocel", text);
  try {
    cmd_predict((dir / "model.ckpt").string(), (dir / "other.jsonocel").string(), "", "", false, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::VersionMismatch);
  }
}

TEST(CmdTrain, SeparateTrainingKeepsNextActivityPredictions) {
  const auto dir = scratch_dir("separate");
  std::ostringstream out;
  auto first = quick_config(dir / "na");
  first.model.loss_weight_ne = 0.0;
  cmd_train(first, out);
  auto second = quick_config(dir / "ne");
  second.init_from = (dir / "na" / "model.ckpt").string();
  second.model.freeze_na = true;
  cmd_train(second, out);

  std::ostringstream a, b;
  cmd_predict((dir / "na" / "model.ckpt").string(), toy_log(), "", "", true, a);
  cmd_predict((dir / "ne" / "model.ckpt").string(), toy_log(), "", "", true, b);
  auto la = csv_lines(a.str()), lb = csv_lines(b.str());
  ASSERT_EQ(la.size(), lb.size());
  // Drops predicted_next_days (5th column); the rest must not move.
  auto strip_time = [](const std::string& line) {
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) start = line.find(',', start) + 1;
    const auto end = line.find(',', start);
    return line.substr(0, start) + (end == std::string::npos ? "" : line.substr(end));
  };
  for (std::size_t i = 1; i < la.size(); ++i) EXPECT_EQ(strip_time(la[i]), strip_time(lb[i]));
  EXPECT_NE(a.str(), b.str());
  std::filesystem::remove_all(dir);
}

TEST(CmdTrain, InitFromMismatchedCheckpointIsVersionMismatch) {
  const auto dir = scratch_dir("init-mismatch");
  std::ostringstream out;
  cmd_train(quick_config(dir / "a"), out);
  auto c = quick_config(dir / "b");
  c.init_from = (dir / "a" / "model.ckpt").string();
  c.model.lstm_hidden += 1;
  try {
    cmd_train(c, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::VersionMismatch);
  }
  std::filesystem::remove_all(dir);
}

TEST(CmdTrain, MajorityClassDoesNotBeatTrainedModel) {
  const auto dir = scratch_dir("majority");
  auto c = quick_config(dir);
  c.model.epochs = 60;
  c.ratios = {1.0, 0.0, 0.0};
  std::ostringstream out;
  const auto outcome = cmd_train(c, out);
  const auto log = load_log(toy_log());
  const NodeIndex index(discover_ocdfg(log, {"item", "order"}).activities);
  const auto samples = build_prefixes(flatten(log, "order"), index);
  std::map<int, int> counts;
  for (const auto& s : samples) ++counts[s.target_na];
  int top = 0;
  for (const auto& [k, n] : counts) top = std::max(top, n);
  const double majority = double(top) / double(samples.size());
  EXPECT_LE(majority, outcome.run.history.at(static_cast<std::size_t>(outcome.run.best_epoch - 1)).na_accuracy);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OCPM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  write_file(dir / "broken.jsonocel", "{\"ocel:events\": [");
  EXPECT_EQ(run_cli("summary " + toy_log()), 0);
  EXPECT_EQ(run_cli("summary /nonexistent.jsonocel"), 2);
  EXPECT_EQ(run_cli("summary " + (dir / "broken.jsonocel").string()), 3);
  EXPECT_EQ(run_cli("bogus"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("flatten " + toy_log() + " --type truck"), 3);
  EXPECT_EQ(run_cli("train --input " + toy_log()), 2);
  EXPECT_EQ(run_cli("train -c " + testing::toy_config() + " --set colour=blue"), 2);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = scratch_dir("cli-precedence");
  ASSERT_EQ(run_cli("train -c " + testing::toy_config() + " --input " + toy_log() + " --epochs 2 --lr 0.02 --output-dir " +
                    dir.string()),
            0);
  RunConfig echoed;
  apply_config_file(echoed, (dir / "effective_config.txt").string());
  EXPECT_EQ(echoed.model.epochs, 2);
  EXPECT_EQ(echoed.model.learning_rate, 0.02);
  EXPECT_EQ(echoed.model.lstm_hidden, 32);
  EXPECT_EQ(csv_lines(read_file((dir / "history.csv").string())).size(), 3u);
}

}  // namespace
}  // namespace ocpm
