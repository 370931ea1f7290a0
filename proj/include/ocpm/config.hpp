// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: `key = value` lines, `#` starts a comment. Keys are
// listed in docs/config.md. Flags override the file, the file overrides defaults.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ocpm/dataset.hpp"
#include "ocpm/error.hpp"
#include "ocpm/model.hpp"

namespace ocpm {

inline constexpr const char* kOutputDirEnv = "OCPM_OUTPUT_DIR";

struct RunConfig {
  std::string input;
  /// Object types flattened into the OCDFG; empty means every type in the log.
  std::vector<std::string> types;
  /// Object type whose prefixes are predicted.
  std::string target;
  ModelConfig model;
  SplitRatios ratios{0.8, 0.0, 0.2};
  /// 0 selects the 95th percentile of training prefix lengths.
  std::size_t max_len = 0;
  std::uint64_t min_freq = 0;
  std::string output_dir;
  bool drop_invalid = false;
  /// Checkpoint whose parameters seed training instead of a fresh initialisation.
  std::string init_from;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  N out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if constexpr (std::is_floating_point_v<N>) {
    char* end = nullptr;
    out = static_cast<N>(std::strtod(value.c_str(), &end));
    if (value.empty() || end != last) throw Error(ErrorKind::InvalidConfig, key + ": '" + value + "' is not a number");
  } else {
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw Error(ErrorKind::InvalidConfig, key + ": '" + value + "' is not an integer");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorKind::InvalidConfig, key + ": '" + value + "' is not a boolean");
}

inline std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Applies one setting; unknown keys are rejected.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_number;
  const std::string value = detail::trim(raw);
  if (key == "input") c.input = value;
  else if (key == "types") c.types = detail::split_list(value);
  else if (key == "target") c.target = value;
  else if (key == "gat_hidden") c.model.gat_hidden = parse_number<int>(key, value);
  else if (key == "embed_dim") c.model.embed_dim = parse_number<int>(key, value);
  else if (key == "attention_heads") c.model.attention_heads = parse_number<int>(key, value);
  else if (key == "lstm_hidden") c.model.lstm_hidden = parse_number<int>(key, value);
  else if (key == "loss_weight_ne") c.model.loss_weight_ne = parse_number<double>(key, value);
  else if (key == "learning_rate") c.model.learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") c.model.batch_size = parse_number<int>(key, value);
  else if (key == "epochs") c.model.epochs = parse_number<int>(key, value);
  else if (key == "seed") c.model.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "patience") c.model.patience = parse_number<int>(key, value);
  else if (key == "train_ratio") c.ratios.train = parse_number<double>(key, value);
  else if (key == "validation_ratio") c.ratios.validation = parse_number<double>(key, value);
  else if (key == "test_ratio") c.ratios.test = parse_number<double>(key, value);
  else if (key == "max_len") c.max_len = parse_number<std::size_t>(key, value);
  else if (key == "min_freq") c.min_freq = parse_number<std::uint64_t>(key, value);
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "drop_invalid") c.drop_invalid = detail::parse_bool(key, value);
  else if (key == "freeze_na") c.model.freeze_na = detail::parse_bool(key, value);
  else if (key == "init_from") c.init_from = value;
  else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

inline void apply_config_text(RunConfig& c, std::string_view text, const std::string& source = "config") {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      apply_setting(c, detail::trim(trimmed.substr(0, eq)), trimmed.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfig, source + ":" + std::to_string(number) + ": " + e.message());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(c, buf.str(), path);
}

/// Checks everything that can be checked without reading the log.
inline void validate(RunConfig& c) {
  if (c.input.empty()) throw Error(ErrorKind::InvalidConfig, "no input log given");
  if (c.target.empty()) throw Error(ErrorKind::InvalidConfig, "no target object type given");
  if (!c.types.empty() && std::find(c.types.begin(), c.types.end(), c.target) == c.types.end()) {
    throw Error(ErrorKind::InvalidConfig, "target type '" + c.target + "' is not among the flattened types");
  }
  c.model.validate();
  const double total = c.ratios.train + c.ratios.validation + c.ratios.test;
  if (c.ratios.train <= 0 || c.ratios.validation < 0 || c.ratios.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidConfig, "split ratios must be non-negative, train > 0, and sum to 1");
  }
}

/// Effective configuration in the same `key = value` format, round-trippable.
inline std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  std::string types;
  for (std::size_t i = 0; i < c.types.size(); ++i) types += (i ? "," : "") + c.types[i];
  out << "input = " << c.input << '\n'
      << "types = " << types << '\n'
      << "target = " << c.target << '\n'
      << "gat_hidden = " << c.model.gat_hidden << '\n'
      << "embed_dim = " << c.model.embed_dim << '\n'
      << "attention_heads = " << c.model.attention_heads << '\n'
      << "lstm_hidden = " << c.model.lstm_hidden << '\n'
      << "loss_weight_ne = " << detail::exact(c.model.loss_weight_ne) << '\n'
      << "learning_rate = " << detail::exact(c.model.learning_rate) << '\n'
      << "batch_size = " << c.model.batch_size << '\n'
      << "epochs = " << c.model.epochs << '\n'
      << "seed = " << c.model.seed << '\n'
      << "patience = " << c.model.patience << '\n'
      << "train_ratio = " << detail::exact(c.ratios.train) << '\n'
      << "validation_ratio = " << detail::exact(c.ratios.validation) << '\n'
      << "test_ratio = " << detail::exact(c.ratios.test) << '\n'
      << "max_len = " << c.max_len << '\n'
      << "min_freq = " << c.min_freq << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "drop_invalid = " << (c.drop_invalid ? "true" : "false") << '\n'
      << "freeze_na = " << (c.model.freeze_na ? "true" : "false") << '\n'
      << "init_from = " << c.init_from << '\n';
  return out.str();
}

}  // namespace ocpm
