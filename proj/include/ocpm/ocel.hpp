// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocpm/error.hpp"
#include "ocpm/time.hpp"

namespace ocpm {

struct ObjectRef {
  std::string id;
  std::string type;
  nlohmann::json attributes = nlohmann::json::object();
};

struct Event {
  std::string id;
  std::string activity;
  Timestamp timestamp;
  /// Related object ids, sorted and unique.
  std::vector<std::string> omap;
  nlohmann::json attributes = nlohmann::json::object();
};

struct ParseOptions {
  /// Drop events with an empty object map and ignore dangling object ids
  /// instead of rejecting the log.
  bool drop_invalid = false;
  /// Keep `ocel:vmap` / `ocel:ovmap` payloads so they survive serialization.
  bool keep_attributes = true;
};

/// Immutable object-centric event log. Events are kept in the total order
/// (timestamp, event id).
class ObjectCentricEventLog {
 public:
  ObjectCentricEventLog() = default;

  /// Validates and orders the given events. Throws on the first class of
  /// problem found, with every offending event listed in the message.
  ObjectCentricEventLog(std::vector<Event> events, std::vector<ObjectRef> objects, const ParseOptions& options = {}) {
    std::vector<std::string> problems;
    ErrorKind first_kind = ErrorKind::InvalidEvent;
    auto report = [&](ErrorKind kind, std::string msg) {
      if (problems.empty()) first_kind = kind;
      problems.push_back(std::move(msg));
    };

    for (auto& object : objects) {
      if (object.id.empty()) {
        report(ErrorKind::MalformedInput, "object with empty id");
        continue;
      }
      if (object.type.empty()) {
        report(ErrorKind::MalformedInput, "object '" + object.id + "' has no type");
        continue;
      }
      if (object.attributes.is_null()) object.attributes = nlohmann::json::object();
      auto [it, inserted] = objects_.emplace(object.id, object);
      if (!inserted && it->second.type != object.type) {
        report(ErrorKind::MalformedInput, "object '" + object.id + "' declared with two types");
      }
    }

    std::set<std::string> seen_ids;
    events_.reserve(events.size());
    for (auto& event : events) {
      if (!seen_ids.insert(event.id).second) {
        report(ErrorKind::MalformedInput, "duplicate event id '" + event.id + "'");
        continue;
      }
      if (event.activity.empty()) {
        report(ErrorKind::MalformedInput, "event '" + event.id + "' has an empty activity");
        continue;
      }
      if (event.attributes.is_null()) event.attributes = nlohmann::json::object();
      std::sort(event.omap.begin(), event.omap.end());
      event.omap.erase(std::unique(event.omap.begin(), event.omap.end()), event.omap.end());
      std::vector<std::string> known;
      known.reserve(event.omap.size());
      for (auto& oid : event.omap) {
        if (objects_.count(oid)) {
          known.push_back(std::move(oid));
        } else if (!options.drop_invalid) {
          report(ErrorKind::DanglingObjectRef, "event '" + event.id + "' references unknown object '" + oid + "'");
        }
      }
      const bool dangling = known.size() != event.omap.size();
      event.omap = std::move(known);
      if (event.omap.empty()) {
        if (options.drop_invalid || dangling) continue;
        report(ErrorKind::InvalidEvent, "event '" + event.id + "' has an empty object map");
        continue;
      }
      events_.push_back(std::move(event));
    }

    if (!problems.empty()) {
      std::ostringstream msg;
      msg << problems.size() << " validation error(s): ";
      const std::size_t shown = std::min<std::size_t>(problems.size(), 10);
      for (std::size_t i = 0; i < shown; ++i) msg << (i ? "; " : "") << problems[i];
      if (shown < problems.size()) msg << "; ... and " << problems.size() - shown << " more";
      throw Error(first_kind, msg.str());
    }

    std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
      return std::tie(a.timestamp, a.id) < std::tie(b.timestamp, b.id);
    });
    for (const auto& [id, object] : objects_) object_types_.insert(object.type);
  }

  const std::vector<Event>& events() const { return events_; }
  const std::map<std::string, ObjectRef>& objects() const { return objects_; }
  const std::set<std::string>& object_types() const { return object_types_; }

  const std::string& type_of(const std::string& object_id) const {
    auto it = objects_.find(object_id);
    if (it == objects_.end()) throw Error(ErrorKind::DanglingObjectRef, "unknown object '" + object_id + "'");
    return it->second.type;
  }

  bool has_type(const std::string& type) const { return object_types_.count(type) != 0; }

 private:
  std::vector<Event> events_;
  std::map<std::string, ObjectRef> objects_;
  std::set<std::string> object_types_;
};

namespace detail {

inline std::string line_context(std::string_view source, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < source.size(); ++i) {
    if (source[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline const nlohmann::json& require(const nlohmann::json& node, const char* key, const std::string& where) {
  auto it = node.find(key);
  if (it == node.end()) throw Error(ErrorKind::MalformedInput, where + ": missing key '" + key + "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& node, const char* key, const std::string& where) {
  const auto& value = require(node, key, where);
  if (!value.is_string()) throw Error(ErrorKind::MalformedInput, where + ": '" + key + "' must be a string");
  return value.get<std::string>();
}

inline Event parse_event(const std::string& id, const nlohmann::json& node, const ParseOptions& options) {
  const std::string where = "event '" + id + "'";
  if (!node.is_object()) throw Error(ErrorKind::MalformedInput, where + " is not an object");
  Event event;
  event.id = id;
  event.activity = require_string(node, "ocel:activity", where);
  const std::string stamp = require_string(node, "ocel:timestamp", where);
  try {
    event.timestamp = parse_timestamp(stamp);
  } catch (const Error&) {
    throw Error(ErrorKind::UnparseableTimestamp, where + ": cannot parse timestamp '" + stamp + "'");
  }
  const auto& omap = require(node, "ocel:omap", where);
  if (!omap.is_array()) throw Error(ErrorKind::MalformedInput, where + ": 'ocel:omap' must be an array");
  for (const auto& oid : omap) {
    if (!oid.is_string()) throw Error(ErrorKind::MalformedInput, where + ": object ids must be strings");
    event.omap.push_back(oid.get<std::string>());
  }
  if (options.keep_attributes) {
    if (auto it = node.find("ocel:vmap"); it != node.end() && it->is_object()) event.attributes = *it;
  }
  return event;
}

inline ObjectRef parse_object(const std::string& id, const nlohmann::json& node, const ParseOptions& options) {
  const std::string where = "object '" + id + "'";
  if (!node.is_object()) throw Error(ErrorKind::MalformedInput, where + " is not an object");
  ObjectRef object{id, require_string(node, "ocel:type", where)};
  if (options.keep_attributes) {
    if (auto it = node.find("ocel:ovmap"); it != node.end() && it->is_object()) object.attributes = *it;
  }
  return object;
}

inline std::string element_id(const nlohmann::json& node, std::initializer_list<const char*> keys, const char* what) {
  for (const char* key : keys) {
    if (auto it = node.find(key); it != node.end() && it->is_string()) return it->get<std::string>();
  }
  throw Error(ErrorKind::MalformedInput, std::string(what) + " array element without an id");
}

}  // namespace detail

/// Reads a JSON-OCEL (OCEL 1.0) document. Accepts `ocel:events` / `ocel:objects`
/// either as id-keyed maps (the standard layout) or as arrays of records with
/// `ocel:id`.
inline ObjectCentricEventLog parse_ocel(std::string_view source, const ParseOptions& options = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(source.begin(), source.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedInput,
                "invalid JSON at " + detail::line_context(source, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::MalformedInput, "top-level JSON value must be an object");

  const auto& events_node = detail::require(doc, "ocel:events", "log");
  const auto& objects_node = detail::require(doc, "ocel:objects", "log");

  std::vector<ObjectRef> objects;
  if (objects_node.is_object()) {
    for (const auto& [id, node] : objects_node.items()) objects.push_back(detail::parse_object(id, node, options));
  } else if (objects_node.is_array()) {
    for (const auto& node : objects_node) {
      objects.push_back(detail::parse_object(detail::element_id(node, {"ocel:id", "ocel:oid"}, "object"), node, options));
    }
  } else {
    throw Error(ErrorKind::MalformedInput, "'ocel:objects' must be an object or array");
  }

  std::vector<Event> events;
  if (events_node.is_object()) {
    for (const auto& [id, node] : events_node.items()) events.push_back(detail::parse_event(id, node, options));
  } else if (events_node.is_array()) {
    for (const auto& node : events_node) {
      events.push_back(detail::parse_event(detail::element_id(node, {"ocel:id", "ocel:eid"}, "event"), node, options));
    }
  } else {
    throw Error(ErrorKind::MalformedInput, "'ocel:events' must be an object or array");
  }

  return ObjectCentricEventLog(std::move(events), std::move(objects), options);
}

/// Writes the log back as OCEL 1.0 JSON.
inline std::string serialize_ocel(const ObjectCentricEventLog& log, int indent = -1) {
  nlohmann::json doc;
  doc["ocel:global-event"] = {{"ocel:activity", "__INVALID__"}};
  doc["ocel:global-object"] = {{"ocel:type", "__INVALID__"}};
  doc["ocel:global-log"] = {{"ocel:version", "1.0"},
                            {"ocel:ordering", "timestamp"},
                            {"ocel:attribute-names", nlohmann::json::array()},
                            {"ocel:object-types", log.object_types()}};
  auto& events = doc["ocel:events"] = nlohmann::json::object();
  for (const auto& e : log.events()) {
    events[e.id] = {{"ocel:activity", e.activity},
                    {"ocel:timestamp", format_timestamp(e.timestamp)},
                    {"ocel:omap", e.omap},
                    {"ocel:vmap", e.attributes}};
  }
  auto& objects = doc["ocel:objects"] = nlohmann::json::object();
  for (const auto& [id, o] : log.objects()) objects[id] = {{"ocel:type", o.type}, {"ocel:ovmap", o.attributes}};
  return doc.dump(indent);
}

struct SummaryReport {
  std::size_t events = 0;
  std::size_t objects = 0;
  std::size_t object_types = 0;
  std::size_t activities = 0;
  std::optional<Timestamp> first;
  std::optional<Timestamp> last;
  /// Object types where some event relates to more than one object of that type.
  std::vector<std::string> convergent_types;
};

inline SummaryReport log_summary(const ObjectCentricEventLog& log) {
  SummaryReport report;
  report.events = log.events().size();
  report.objects = log.objects().size();
  report.object_types = log.object_types().size();
  std::set<std::string> activities;
  std::set<std::string> convergent;
  for (const auto& e : log.events()) {
    activities.insert(e.activity);
    std::map<std::string_view, int> per_type;
    for (const auto& oid : e.omap) {
      if (++per_type[log.type_of(oid)] == 2) convergent.insert(log.type_of(oid));
    }
  }
  report.activities = activities.size();
  if (!log.events().empty()) {
    report.first = log.events().front().timestamp;
    report.last = log.events().back().timestamp;
  }
  report.convergent_types.assign(convergent.begin(), convergent.end());
  return report;
}

inline std::string format_summary(const SummaryReport& s) {
  std::ostringstream out;
  out << "events:        " << s.events << '\n'
      << "objects:       " << s.objects << '\n'
      << "object types:  " << s.object_types << '\n'
      << "activities:    " << s.activities << '\n';
  if (s.first) {
    out << "time span:     " << format_timestamp(*s.first) << " .. " << format_timestamp(*s.last) << " ("
        << s.last->seconds_since(*s.first) / 86400.0 << " days)\n";
  } else {
    out << "time span:     (empty)\n";
  }
  out << "multi-object:  ";
  if (s.convergent_types.empty()) out << "(none)";
  for (std::size_t i = 0; i < s.convergent_types.size(); ++i) out << (i ? ", " : "") << s.convergent_types[i];
  out << '\n';
  return out.str();
}

}  // namespace ocpm
