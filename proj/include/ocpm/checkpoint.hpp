// SPDX-License-Identifier: Apache-2.0
#pragma once

// Single-file model container; byte layout in docs/checkpoint.md.

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocpm/dataset.hpp"
#include "ocpm/error.hpp"
#include "ocpm/model.hpp"

namespace ocpm {

inline constexpr char kCheckpointMagic[8] = {'O', 'C', 'P', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// How the training data was cut, so evaluation can rebuild the same test split.
struct DatasetMeta {
  std::string object_type;
  SplitRatios ratios;
  std::uint64_t split_seed = 42;
  std::size_t max_len = 0;
};

template <typename T>
struct Checkpoint {
  ModelConfig config;
  NodeIndex node_index;
  std::vector<std::string> object_types;
  ScalingStats scaling;
  GraphTensors graph;
  DatasetMeta meta;
  ModelParameters<T> params;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  template <typename V>
  void put(V v) {
    static_assert(std::is_trivially_copyable_v<V>);
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out_.append(buf, sizeof(V));
  }
  void put_bytes(std::string_view s) { out_.append(s); }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  template <typename V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)).data(), sizeof(V));
    return v;
  }
  std::string_view take(std::size_t n) {
    if (n > in_.size() - pos_) throw Error(ErrorKind::CorruptCheckpoint, "checkpoint is truncated");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string get_string() { return std::string(take(get<std::uint32_t>())); }
  std::size_t position() const { return pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"gat_hidden", c.gat_hidden},       {"embed_dim", c.embed_dim},
          {"attention_heads", c.attention_heads}, {"lstm_hidden", c.lstm_hidden},
          {"loss_weight_ne", c.loss_weight_ne}, {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},       {"epochs", c.epochs},
          {"seed", c.seed},                   {"patience", c.patience},
          {"freeze_na", c.freeze_na}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.gat_hidden = j.at("gat_hidden").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.attention_heads = j.at("attention_heads").get<int>();
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.loss_weight_ne = j.at("loss_weight_ne").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.patience = j.at("patience").get<int>();
  c.freeze_na = j.value("freeze_na", false);
  return c;
}

}  // namespace detail

template <typename T>
std::string save_model(const Checkpoint<T>& ckpt) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint8_t>(sizeof(T)));

  nlohmann::json header;
  header["config"] = detail::config_to_json(ckpt.config);
  header["activities"] = ckpt.node_index.labels();
  header["object_types"] = ckpt.object_types;
  header["dataset"] = {{"object_type", ckpt.meta.object_type},
                       {"train", ckpt.meta.ratios.train},
                       {"validation", ckpt.meta.ratios.validation},
                       {"test", ckpt.meta.ratios.test},
                       {"split_seed", ckpt.meta.split_seed},
                       {"max_len", ckpt.meta.max_len}};
  w.put_string(header.dump());

  for (double m : ckpt.scaling.means) w.put(m);
  for (bool d : ckpt.scaling.degenerate) w.put(static_cast<std::uint8_t>(d));

  const auto& g = ckpt.graph;
  w.put(static_cast<std::uint64_t>(g.num_nodes));
  w.put(static_cast<std::uint64_t>(g.num_types));
  w.put(static_cast<std::uint64_t>(g.num_edges()));
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    w.put(static_cast<std::int32_t>(g.source[e]));
    w.put(static_cast<std::int32_t>(g.target[e]));
  }
  for (Eigen::Index i = 0; i < g.edge_features.size(); ++i) w.put(g.edge_features.data()[i]);

  std::uint32_t count = 0;
  ckpt.params.for_each([&](const ag::Parameter<T>&) { ++count; });
  w.put(count);
  ckpt.params.for_each([&](const ag::Parameter<T>& p) {
    w.put_string(p.name);
    w.put(static_cast<std::uint32_t>(p.value.rows()));
    w.put(static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) w.put(p.value.data()[i]);
  });
  w.put(detail::fnv1a(w.str()));
  return std::move(w.str());
}

template <typename T>
Checkpoint<T> load_model(std::string_view bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    if (bytes.size() >= sizeof kCheckpointMagic && std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) == 0) {
      throw Error(ErrorKind::CorruptCheckpoint, "checkpoint is truncated");
    }
    throw Error(ErrorKind::CorruptCheckpoint, "not a model checkpoint");
  }
  const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  detail::ByteReader r(bytes);
  r.take(sizeof kCheckpointMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  }
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + body.size(), sizeof stored_sum);
  if (stored_sum != detail::fnv1a(body)) throw Error(ErrorKind::CorruptCheckpoint, "checksum mismatch (truncated or damaged file)");
  const auto scalar = r.get<std::uint8_t>();
  if (scalar != sizeof(T)) {
    throw Error(ErrorKind::VersionMismatch, "checkpoint stores " + std::to_string(scalar * 8) + "-bit parameters");
  }

  Checkpoint<T> ckpt;
  try {
    const auto header = nlohmann::json::parse(r.get_string());
    ckpt.config = detail::config_from_json(header.at("config"));
    ckpt.node_index = NodeIndex(header.at("activities").get<std::vector<std::string>>());
    ckpt.object_types = header.at("object_types").get<std::vector<std::string>>();
    const auto& ds = header.at("dataset");
    ckpt.meta.object_type = ds.at("object_type").get<std::string>();
    ckpt.meta.ratios = {ds.at("train").get<double>(), ds.at("validation").get<double>(), ds.at("test").get<double>()};
    ckpt.meta.split_seed = ds.at("split_seed").get<std::uint64_t>();
    ckpt.meta.max_len = ds.at("max_len").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, std::string("header: ") + e.what());
  }

  for (double& m : ckpt.scaling.means) m = r.get<double>();
  for (std::size_t i = 0; i < 4; ++i) ckpt.scaling.degenerate[i] = r.get<std::uint8_t>() != 0;

  auto& g = ckpt.graph;
  g.num_nodes = r.get<std::uint64_t>();
  g.num_types = r.get<std::uint64_t>();
  const auto edges = r.get<std::uint64_t>();
  if (g.num_nodes != ckpt.node_index.size() || g.num_types != ckpt.object_types.size() || edges > bytes.size()) {
    throw Error(ErrorKind::CorruptCheckpoint, "graph section disagrees with header");
  }
  for (std::uint64_t e = 0; e < edges; ++e) {
    g.source.push_back(r.get<std::int32_t>());
    g.target.push_back(r.get<std::int32_t>());
  }
  g.node_features = Matrix<double>::Identity(static_cast<Eigen::Index>(g.num_nodes), static_cast<Eigen::Index>(g.num_nodes));
  g.edge_features.resize(static_cast<Eigen::Index>(edges), static_cast<Eigen::Index>(g.num_types));
  for (Eigen::Index i = 0; i < g.edge_features.size(); ++i) g.edge_features.data()[i] = r.get<double>();

  try {
    ckpt.params = init_parameters<T>(ckpt.config, g.num_nodes, g.num_types, 0);
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptCheckpoint, e.what());
  }
  const auto count = r.get<std::uint32_t>();
  std::uint32_t seen = 0;
  ckpt.params.for_each([&](ag::Parameter<T>& p) {
    ++seen;
    if (seen > count) throw Error(ErrorKind::CorruptCheckpoint, "missing tensor '" + p.name + "'");
    const auto name = r.get_string();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw Error(ErrorKind::CorruptCheckpoint, "unexpected tensor '" + name + "'");
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = r.get<T>();
    p.zero_grad();
  });
  if (seen != count || r.position() != body.size()) throw Error(ErrorKind::CorruptCheckpoint, "trailing tensors");
  return ckpt;
}

}  // namespace ocpm
