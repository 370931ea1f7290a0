// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocpm/error.hpp"
#include "ocpm/flatten.hpp"
#include "ocpm/ocel.hpp"

namespace ocpm {

using ActivityPair = std::pair<std::string, std::string>;

/// Directly-follows graph with edge frequencies.
struct Dfg {
  std::set<std::string> activities;
  std::map<ActivityPair, std::uint64_t> edges;

  bool operator==(const Dfg&) const = default;
};

/// Merged DFGs of several object types; each edge carries one frequency per
/// entry of `object_types` (zero where that type's DFG lacks the edge).
struct Ocdfg {
  std::set<std::string> activities;
  std::vector<std::string> object_types;
  std::map<ActivityPair, std::vector<std::uint64_t>> edges;

  bool operator==(const Ocdfg&) const = default;
};

/// Dense activity <-> index mapping in lexicographic label order.
class NodeIndex {
 public:
  NodeIndex() = default;

  explicit NodeIndex(const std::set<std::string>& activities) : labels_(activities.begin(), activities.end()) {
    for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], static_cast<int>(i));
  }

  explicit NodeIndex(std::vector<std::string> labels) : NodeIndex(std::set<std::string>(labels.begin(), labels.end())) {}

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }

  std::optional<int> find(const std::string& activity) const {
    auto it = index_.find(activity);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int at(const std::string& activity) const {
    auto it = index_.find(activity);
    if (it == index_.end()) throw Error(ErrorKind::UnknownActivity, "activity '" + activity + "' has no graph node");
    return it->second;
  }

  bool operator==(const NodeIndex& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
};

inline Dfg discover_dfg(const FlattenedLog& fl) {
  Dfg dfg;
  for (const auto& e : fl.events) dfg.activities.insert(e.activity);
  for (const auto& [case_id, indices] : fl.cases) {
    for (std::size_t i = 1; i < indices.size(); ++i) {
      ++dfg.edges[{fl.events[indices[i - 1]].activity, fl.events[indices[i]].activity}];
    }
  }
  return dfg;
}

/// Merges already discovered DFGs, one per object type, in the given order.
inline Ocdfg merge_dfgs(const std::vector<std::string>& object_types, const std::vector<Dfg>& dfgs) {
  if (object_types.size() != dfgs.size()) throw Error(ErrorKind::ShapeMismatch, "one DFG per object type expected");
  Ocdfg g;
  g.object_types = object_types;
  for (std::size_t t = 0; t < dfgs.size(); ++t) {
    g.activities.insert(dfgs[t].activities.begin(), dfgs[t].activities.end());
    for (const auto& [edge, freq] : dfgs[t].edges) {
      auto [it, inserted] = g.edges.try_emplace(edge, dfgs.size(), 0);
      it->second[t] = freq;
    }
  }
  return g;
}

/// Flattens the log per requested type (sorted, deduplicated), discovers each
/// DFG and merges them.
inline Ocdfg discover_ocdfg(const ObjectCentricEventLog& log, const std::vector<std::string>& types) {
  if (types.empty()) throw Error(ErrorKind::UnknownObjectType, "at least one object type is required");
  std::set<std::string> unique(types.begin(), types.end());
  std::vector<std::string> ordered(unique.begin(), unique.end());
  std::vector<Dfg> dfgs;
  dfgs.reserve(ordered.size());
  for (const auto& type : ordered) dfgs.push_back(discover_dfg(flatten(log, type)));
  return merge_dfgs(ordered, dfgs);
}

/// Drops edges whose every per-type frequency is below `min_freq`. Activities are kept.
inline Ocdfg filter_min_frequency(Ocdfg g, std::uint64_t min_freq) {
  if (min_freq == 0) return g;
  std::erase_if(g.edges, [&](const auto& item) {
    return std::all_of(item.second.begin(), item.second.end(), [&](std::uint64_t f) { return f < min_freq; });
  });
  return g;
}

namespace detail {

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline std::string export_dot(const Ocdfg& g) {
  const NodeIndex index(g.activities);
  std::ostringstream out;
  out << "digraph ocdfg {\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    out << "  n" << i << " [label=" << detail::dot_quote(index.label(static_cast<int>(i))) << "];\n";
  }
  for (const auto& [edge, freqs] : g.edges) {
    std::string label;
    for (std::size_t t = 0; t < freqs.size(); ++t) {
      if (t) label += "\\n";
      label += g.object_types[t] + "=" + std::to_string(freqs[t]);
    }
    out << "  n" << index.at(edge.first) << " -> n" << index.at(edge.second) << " [label=\"" << label << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

/// JSON layout: {"object_types": [...], "nodes": [{"activity", "index"}],
/// "edges": [{"source", "target", "frequencies": {type: count}}]}.
inline nlohmann::json graph_to_json(const Ocdfg& g) {
  const NodeIndex index(g.activities);
  nlohmann::json doc;
  doc["object_types"] = g.object_types;
  doc["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < index.size(); ++i) {
    doc["nodes"].push_back({{"activity", index.label(static_cast<int>(i))}, {"index", i}});
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& [edge, freqs] : g.edges) {
    nlohmann::json per_type = nlohmann::json::object();
    for (std::size_t t = 0; t < freqs.size(); ++t) per_type[g.object_types[t]] = freqs[t];
    doc["edges"].push_back({{"source", edge.first}, {"target", edge.second}, {"frequencies", per_type}});
  }
  return doc;
}

inline std::string export_json(const Ocdfg& g) { return graph_to_json(g).dump(2) + "\n"; }

inline Ocdfg graph_from_json(const nlohmann::json& doc) {
  try {
    Ocdfg g;
    g.object_types = doc.at("object_types").get<std::vector<std::string>>();
    for (const auto& node : doc.at("nodes")) g.activities.insert(node.at("activity").get<std::string>());
    for (const auto& edge : doc.at("edges")) {
      ActivityPair key{edge.at("source").get<std::string>(), edge.at("target").get<std::string>()};
      if (!g.activities.count(key.first) || !g.activities.count(key.second)) {
        throw Error(ErrorKind::MalformedInput, "edge endpoint is not a declared node");
      }
      std::vector<std::uint64_t> freqs(g.object_types.size(), 0);
      const auto& per_type = edge.at("frequencies");
      for (std::size_t t = 0; t < freqs.size(); ++t) {
        if (auto it = per_type.find(g.object_types[t]); it != per_type.end()) freqs[t] = it->get<std::uint64_t>();
      }
      g.edges.emplace(std::move(key), std::move(freqs));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("graph JSON: ") + e.what());
  }
}

inline Ocdfg import_json(const std::string& text) {
  try {
    return graph_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedInput, std::string("graph JSON: ") + e.what());
  }
}

}  // namespace ocpm
