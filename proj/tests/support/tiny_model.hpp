// SPDX-License-Identifier: Apache-2.0
#pragma once

// The small model and batch shared by the gradient-check tests.

#include <random>
#include <vector>

#include "ocpm/ocpm.hpp"
#include "support/oracles.hpp"

namespace ocpm::testing {

struct TinyProblem {
  ModelConfig config;
  Ocdfg ocdfg;
  NodeIndex index;
  GraphTensors graph;
  std::vector<ScaledSample> samples;
};

/// |A| = 4, two object types, embed 3, LSTM hidden 5, batch of 2 prefixes of
/// different lengths, both loss terms active.
inline TinyProblem tiny_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TinyProblem p;
  p.config.gat_hidden = 4;
  p.config.embed_dim = 3;
  p.config.attention_heads = 2;
  p.config.lstm_hidden = 5;
  p.config.loss_weight_ne = 1.0;
  p.config.seed = seed;
  p.ocdfg = random_ocdfg(rng, 4, 2);
  p.index = NodeIndex(p.ocdfg.activities);
  p.graph = build_graph_tensors(p.ocdfg, p.index);
  p.samples = random_scaled_samples(rng, 2, 4, 3);
  if (p.samples[0].activities.size() == p.samples[1].activities.size()) {
    p.samples[1].activities.push_back(1);
    p.samples[1].features.push_back({0.5, 0.5, 0.5, 0.5});
  }
  return p;
}

template <typename T>
Batch<T> tiny_batch(const TinyProblem& p) {
  std::size_t longest = 0;
  for (const auto& s : p.samples) longest = std::max(longest, s.activities.size());
  return pad_batch<T>(p.samples, longest + 1);
}

}  // namespace ocpm::testing
