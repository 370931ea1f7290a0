// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "ocpm/error.hpp"

namespace ocpm {

/// Absolute instant with millisecond precision, counted from the Unix epoch (UTC).
struct Timestamp {
  std::int64_t millis = 0;

  auto operator<=>(const Timestamp&) const = default;

  double seconds_since(Timestamp earlier) const {
    return static_cast<double>(millis - earlier.millis) / 1000.0;
  }
};

inline constexpr std::int64_t kMillisPerDay = 86'400'000;

namespace detail {

// Proleptic Gregorian civil date <-> days since 1970-01-01.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }
  void skip() { ++pos_; }

  bool digits(std::size_t count, int& out) {
    if (pos_ + count > text_.size()) return false;
    const char* first = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, first + count, out);
    if (ec != std::errc() || ptr != first + count) return false;
    pos_ += count;
    return true;
  }

  bool expect(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses ISO-8601 instants: `YYYY-MM-DD[(T| )HH:MM[:SS[.fff...]]][Z|(+|-)HH[:]MM]`.
/// Timestamps without an offset are read as UTC.
inline Timestamp parse_timestamp(std::string_view text) {
  auto fail = [&]() -> Timestamp {
    throw Error(ErrorKind::UnparseableTimestamp, "cannot parse timestamp '" + std::string(text) + "'");
  };
  detail::Cursor cur(text);
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  std::int64_t millis = 0;
  if (!cur.digits(4, year) || !cur.expect('-') || !cur.digits(2, month) || !cur.expect('-') ||
      !cur.digits(2, day)) {
    return fail();
  }
  if (month < 1 || month > 12 || day < 1 || day > 31) return fail();
  if (cur.peek() == 'T' || cur.peek() == 't' || cur.peek() == ' ') {
    cur.skip();
    if (!cur.digits(2, hour) || !cur.expect(':') || !cur.digits(2, minute)) return fail();
    if (cur.expect(':')) {
      if (!cur.digits(2, second)) return fail();
      if (cur.expect('.') || cur.expect(',')) {
        int scale = 100;
        bool any = false;
        while (cur.peek() >= '0' && cur.peek() <= '9') {
          millis += (cur.peek() - '0') * scale;
          scale /= 10;
          any = true;
          cur.skip();
        }
        if (!any) return fail();
      }
    }
  }
  if (hour > 23 || minute > 59 || second > 60) return fail();
  std::int64_t offset_minutes = 0;
  if (cur.peek() == 'Z' || cur.peek() == 'z') {
    cur.skip();
  } else if (cur.peek() == '+' || cur.peek() == '-') {
    const int sign = cur.peek() == '-' ? -1 : 1;
    cur.skip();
    int oh = 0, om = 0;
    if (!cur.digits(2, oh)) return fail();
    cur.expect(':');
    if (!cur.done() && !cur.digits(2, om)) return fail();
    offset_minutes = sign * (oh * 60 + om);
  }
  if (!cur.done()) return fail();

  const std::int64_t days = detail::days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t local =
      days * kMillisPerDay + ((hour * 60LL + minute) * 60LL + second) * 1000LL + millis;
  return Timestamp{local - offset_minutes * 60'000LL};
}

/// Formats as `YYYY-MM-DDTHH:MM:SS[.mmm]Z`; the fraction is emitted only when non-zero.
inline std::string format_timestamp(Timestamp t) {
  const std::int64_t days = detail::floor_div(t.millis, kMillisPerDay);
  const std::int64_t in_day = t.millis - days * kMillisPerDay;
  const auto date = detail::civil_from_days(days);
  const auto ms = static_cast<int>(in_day % 1000);
  const auto secs = in_day / 1000;
  char buf[48];
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(date.year),
                  date.month, date.day, static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                  static_cast<long long>(secs % 60));
  } else {
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%03dZ", static_cast<long long>(date.year),
                  date.month, date.day, static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                  static_cast<long long>(secs % 60), ms);
  }
  return buf;
}

/// Seconds elapsed since 00:00 UTC of the instant's day, in [0, 86400).
inline double seconds_since_midnight(Timestamp t) {
  const std::int64_t days = detail::floor_div(t.millis, kMillisPerDay);
  return static_cast<double>(t.millis - days * kMillisPerDay) / 1000.0;
}

/// ISO weekday with Monday = 0 ... Sunday = 6.
inline int weekday(Timestamp t) {
  const std::int64_t days = detail::floor_div(t.millis, kMillisPerDay);
  // 1970-01-01 was a Thursday (3).
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

}  // namespace ocpm
