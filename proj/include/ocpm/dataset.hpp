// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocpm/error.hpp"
#include "ocpm/flatten.hpp"
#include "ocpm/graph.hpp"
#include "ocpm/time.hpp"

namespace ocpm {

inline constexpr int kPadIndex = -1;
inline constexpr std::size_t kTemporalWidth = 4;
inline constexpr double kSecondsPerDay = 86400.0;

/// Raw per-event temporal features, in seconds.
struct TemporalFeatures {
  double since_last = 0.0;
  double since_start = 0.0;
  double since_midnight = 0.0;
  int weekday = 0;

  bool operator==(const TemporalFeatures&) const = default;
};

/// Δ_start is accumulated from Δ_last so that the running-sum identity holds exactly.
inline std::vector<TemporalFeatures> temporal_features(std::span<const Timestamp> timestamps) {
  std::vector<TemporalFeatures> out;
  out.reserve(timestamps.size());
  double elapsed = 0.0;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    TemporalFeatures f;
    if (i > 0) {
      if (timestamps[i] < timestamps[i - 1]) {
        throw Error(ErrorKind::NonMonotonicTimestamps, "timestamp at position " + std::to_string(i) + " goes backwards");
      }
      f.since_last = timestamps[i].seconds_since(timestamps[i - 1]);
      elapsed += f.since_last;
    }
    f.since_start = elapsed;
    f.since_midnight = seconds_since_midnight(timestamps[i]);
    f.weekday = weekday(timestamps[i]);
    out.push_back(f);
  }
  return out;
}

struct PrefixSample {
  std::string case_id;
  std::vector<int> activities;
  std::vector<TemporalFeatures> temporal;
  int target_na = 0;
  /// Seconds until the next event.
  double target_ne = 0.0;
};

/// Emits prefixes of length 1..n-1 for every case of length n >= 2.
inline std::vector<PrefixSample> build_prefixes(const FlattenedLog& fl, const NodeIndex& node_index) {
  std::vector<PrefixSample> samples;
  for (const auto& seq : case_sequences(fl)) {
    if (seq.activities.size() < 2) continue;
    std::vector<int> ids;
    ids.reserve(seq.activities.size());
    for (const auto& a : seq.activities) ids.push_back(node_index.at(a));
    const auto features = temporal_features(seq.timestamps);
    for (std::size_t k = 1; k < ids.size(); ++k) {
      PrefixSample s;
      s.case_id = seq.case_id;
      s.activities.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
      s.temporal.assign(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(k));
      s.target_na = ids[k];
      s.target_ne = seq.timestamps[k].seconds_since(seq.timestamps[k - 1]);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

/// Training-split means of Δ_last, Δ_start, Δ_midnight and the NE target.
struct ScalingStats {
  enum Feature : std::size_t { kSinceLast = 0, kSinceStart = 1, kSinceMidnight = 2, kNextEvent = 3 };

  std::array<double, 4> means{1.0, 1.0, 1.0, 1.0};
  std::array<bool, 4> degenerate{false, false, false, false};

  double divisor(std::size_t feature) const { return degenerate[feature] ? 1.0 : means[feature]; }

  bool operator==(const ScalingStats&) const = default;
};

inline ScalingStats fit_scaling(std::span<const PrefixSample> train) {
  if (train.empty()) throw Error(ErrorKind::EmptyTrainingSplit, "cannot fit scaling on an empty training split");
  std::array<double, 4> sums{};
  std::size_t positions = 0;
  for (const auto& s : train) {
    for (const auto& f : s.temporal) {
      sums[0] += f.since_last;
      sums[1] += f.since_start;
      sums[2] += f.since_midnight;
    }
    positions += s.temporal.size();
    sums[3] += s.target_ne;
  }
  ScalingStats stats;
  const std::array<double, 4> counts{double(positions), double(positions), double(positions), double(train.size())};
  for (std::size_t i = 0; i < 4; ++i) {
    const double mean = counts[i] > 0 ? sums[i] / counts[i] : 0.0;
    stats.degenerate[i] = !(mean > 0.0);
    stats.means[i] = stats.degenerate[i] ? 0.0 : mean;
  }
  return stats;
}

/// Model-ready sample: features are ⟨Δ_last, Δ_start, Δ_midnight⟩ divided by
/// their training means plus weekday / 6.
struct ScaledSample {
  std::string case_id;
  std::vector<int> activities;
  std::vector<std::array<double, kTemporalWidth>> features;
  int target_na = 0;
  double target_ne = 0.0;
};

inline ScaledSample apply_scaling(const PrefixSample& s, const ScalingStats& stats) {
  ScaledSample out;
  out.case_id = s.case_id;
  out.activities = s.activities;
  out.features.reserve(s.temporal.size());
  for (const auto& f : s.temporal) {
    out.features.push_back({f.since_last / stats.divisor(ScalingStats::kSinceLast),
                            f.since_start / stats.divisor(ScalingStats::kSinceStart),
                            f.since_midnight / stats.divisor(ScalingStats::kSinceMidnight), f.weekday / 6.0});
  }
  out.target_na = s.target_na;
  out.target_ne = s.target_ne / stats.divisor(ScalingStats::kNextEvent);
  return out;
}

inline std::vector<ScaledSample> apply_scaling(std::span<const PrefixSample> samples, const ScalingStats& stats) {
  std::vector<ScaledSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(apply_scaling(s, stats));
  return out;
}

/// Scaled NE value back to seconds.
inline double unscale_next_event(double scaled, const ScalingStats& stats) {
  return scaled * stats.divisor(ScalingStats::kNextEvent);
}

enum class Split : std::uint8_t { Train, Validation, Test };

struct SplitRatios {
  double train = 0.8;
  double validation = 0.0;
  double test = 0.2;
};

struct PrefixDataset {
  std::vector<PrefixSample> samples;
  NodeIndex node_index;
  std::size_t max_len = 0;
  std::map<std::string, Split> case_split;

  Split split_of(const PrefixSample& s) const { return case_split.at(s.case_id); }

  std::vector<PrefixSample> subset(Split which) const {
    std::vector<PrefixSample> out;
    for (const auto& s : samples) {
      if (split_of(s) == which) out.push_back(s);
    }
    return out;
  }
};

/// Nearest-rank percentile of prefix lengths.
inline std::size_t length_percentile(std::span<const PrefixSample> samples, double fraction) {
  if (samples.empty()) return 1;
  std::vector<std::size_t> lengths;
  lengths.reserve(samples.size());
  for (const auto& s : samples) lengths.push_back(s.activities.size());
  std::sort(lengths.begin(), lengths.end());
  const auto rank = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(lengths.size())));
  return lengths[std::clamp<std::size_t>(rank, 1, lengths.size()) - 1];
}

/// Shuffles distinct case ids with `seed` and cuts them by ratio, so all
/// prefixes of one case land in the same split. `max_len == 0` selects the
/// 95th percentile of training prefix lengths.
inline PrefixDataset split_by_case(std::vector<PrefixSample> samples, NodeIndex node_index, SplitRatios ratios,
                                   std::uint64_t seed, std::size_t max_len = 0) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidConfig, "split ratios must be non-negative and sum to 1");
  }
  std::set<std::string> unique;
  for (const auto& s : samples) unique.insert(s.case_id);
  std::vector<std::string> cases(unique.begin(), unique.end());
  std::mt19937_64 rng(seed);
  std::shuffle(cases.begin(), cases.end(), rng);

  const std::size_t n = cases.size();
  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(ratios.train * double(n))));
  const auto n_val =
      std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(ratios.validation * double(n))));

  PrefixDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    ds.case_split[cases[i]] = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Validation : Split::Test);
  }
  ds.samples = std::move(samples);
  ds.node_index = std::move(node_index);
  if (max_len == 0) {
    const auto train = ds.subset(Split::Train);
    max_len = length_percentile(train.empty() ? std::span<const PrefixSample>(ds.samples) : std::span(train), 0.95);
  }
  ds.max_len = max_len;
  return ds;
}

/// Keeps the most recent `max_len` events of a prefix.
inline ScaledSample truncate_to_recent(ScaledSample s, std::size_t max_len) {
  if (s.activities.size() <= max_len) return s;
  const auto drop = static_cast<std::ptrdiff_t>(s.activities.size() - max_len);
  s.activities.erase(s.activities.begin(), s.activities.begin() + drop);
  s.features.erase(s.features.begin(), s.features.begin() + drop);
  return s;
}

/// Left-aligned padded batch. Element (b, t) lives at `b * max_len + t`;
/// temporal features at `(b * max_len + t) * 4`.
template <typename T>
struct Batch {
  std::size_t size = 0;
  std::size_t max_len = 0;
  std::vector<int> activities;
  std::vector<T> features;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> lengths;
  std::vector<int> target_na;
  std::vector<T> target_ne;

  bool real(std::size_t b, std::size_t t) const { return mask[b * max_len + t] != 0; }
};

template <typename T>
Batch<T> pad_batch(std::span<const ScaledSample> samples, std::size_t max_len) {
  Batch<T> batch;
  batch.size = samples.size();
  batch.max_len = max_len;
  batch.activities.assign(samples.size() * max_len, kPadIndex);
  batch.features.assign(samples.size() * max_len * kTemporalWidth, T(0));
  batch.mask.assign(samples.size() * max_len, 0);
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const auto& s = samples[b];
    if (s.activities.size() > max_len) {
      throw Error(ErrorKind::PrefixTooLong, "prefix of length " + std::to_string(s.activities.size()) +
                                                " exceeds max_len " + std::to_string(max_len) +
                                                "; truncate to the most recent events first");
    }
    for (std::size_t t = 0; t < s.activities.size(); ++t) {
      batch.activities[b * max_len + t] = s.activities[t];
      batch.mask[b * max_len + t] = 1;
      for (std::size_t f = 0; f < kTemporalWidth; ++f) {
        batch.features[(b * max_len + t) * kTemporalWidth + f] = static_cast<T>(s.features[t][f]);
      }
    }
    batch.lengths.push_back(s.activities.size());
    batch.target_na.push_back(s.target_na);
    batch.target_ne.push_back(static_cast<T>(s.target_ne));
  }
  return batch;
}

/// Debug dump, one JSON object per line.
inline void write_jsonl(std::span<const PrefixSample> samples, const NodeIndex& index, std::ostream& out) {
  for (const auto& s : samples) {
    nlohmann::json row;
    row["case_id"] = s.case_id;
    std::vector<std::string> acts;
    for (int a : s.activities) acts.push_back(index.label(a));
    row["activities"] = acts;
    nlohmann::json temporal = nlohmann::json::array();
    for (const auto& f : s.temporal) temporal.push_back({f.since_last, f.since_start, f.since_midnight, f.weekday});
    row["temporal"] = temporal;
    row["target_na"] = index.label(s.target_na);
    row["target_ne_seconds"] = s.target_ne;
    out << row.dump() << '\n';
  }
}

}  // namespace ocpm
