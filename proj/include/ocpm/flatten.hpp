// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ocpm/error.hpp"
#include "ocpm/ocel.hpp"
#include "ocpm/time.hpp"

namespace ocpm {

struct FlattenedEvent {
  std::string id;
  std::string activity;
  Timestamp timestamp;
  /// Objects of the flattened type related to this event (never empty).
  std::vector<std::string> case_ids;
};

/// Single-object-type view of a log. Each retained event is stored once;
/// `cases` holds, per object, indices into `events` in log order.
struct FlattenedLog {
  std::string object_type;
  std::vector<FlattenedEvent> events;
  std::map<std::string, std::vector<std::size_t>> cases;
};

inline FlattenedLog flatten(const ObjectCentricEventLog& log, const std::string& object_type) {
  if (!log.has_type(object_type)) throw Error(ErrorKind::UnknownObjectType, "object type '" + object_type + "' not in log");
  FlattenedLog fl;
  fl.object_type = object_type;
  for (const auto& event : log.events()) {
    std::vector<std::string> case_ids;
    for (const auto& oid : event.omap) {
      if (log.type_of(oid) == object_type) case_ids.push_back(oid);
    }
    if (case_ids.empty()) continue;
    const std::size_t index = fl.events.size();
    for (const auto& oid : case_ids) fl.cases[oid].push_back(index);
    fl.events.push_back({event.id, event.activity, event.timestamp, std::move(case_ids)});
  }
  return fl;
}

struct CaseSequence {
  std::string case_id;
  std::vector<std::string> activities;
  std::vector<Timestamp> timestamps;
};

/// One sequence per object of the flattened type, ordered by object id.
inline std::vector<CaseSequence> case_sequences(const FlattenedLog& fl) {
  std::vector<CaseSequence> out;
  out.reserve(fl.cases.size());
  for (const auto& [case_id, indices] : fl.cases) {
    CaseSequence seq{case_id, {}, {}};
    seq.activities.reserve(indices.size());
    seq.timestamps.reserve(indices.size());
    for (std::size_t i : indices) {
      seq.activities.push_back(fl.events[i].activity);
      seq.timestamps.push_back(fl.events[i].timestamp);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

}  // namespace detail

/// CSV with one row per (case, event) pair: case_id,event_id,activity,timestamp.
inline void write_flattened_csv(const FlattenedLog& fl, std::ostream& out) {
  out << "case_id,event_id,activity,timestamp\n";
  for (const auto& [case_id, indices] : fl.cases) {
    for (std::size_t i : indices) {
      const auto& e = fl.events[i];
      out << detail::csv_field(case_id) << ',' << detail::csv_field(e.id) << ',' << detail::csv_field(e.activity) << ','
          << format_timestamp(e.timestamp) << '\n';
    }
  }
}

}  // namespace ocpm
