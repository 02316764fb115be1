#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "procast/errors.hpp"

namespace procast {

// Calendar timestamps are reduced to integer seconds since the Unix epoch
// (UTC); sub-second digits in the input are accepted and discarded.

namespace detail {

// Howard Hinnant's civil-date algorithms.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

inline bool read_digits(std::string_view s, std::size_t& pos, int width, std::int64_t& out) {
  std::int64_t v = 0;
  int n = 0;
  while (n < width && pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
    v = v * 10 + (s[pos] - '0');
    ++pos;
    ++n;
  }
  if (n == 0) return false;
  out = v;
  return true;
}

}  // namespace detail

// Parses `text` against a strftime-like format supporting %Y %m %d %H %M %S
// and literal characters. A fractional ".ddd" tail after %S is discarded.
inline std::int64_t parse_timestamp(std::string_view text, std::string_view format) {
  std::int64_t year = 1970, mon = 1, day = 1, hour = 0, min = 0, sec = 0;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] == '%' && f + 1 < format.size()) {
      const char spec = format[++f];
      bool ok = true;
      switch (spec) {
        case 'Y': ok = detail::read_digits(text, pos, 4, year); break;
        case 'm': ok = detail::read_digits(text, pos, 2, mon); break;
        case 'd': ok = detail::read_digits(text, pos, 2, day); break;
        case 'H': ok = detail::read_digits(text, pos, 2, hour); break;
        case 'M': ok = detail::read_digits(text, pos, 2, min); break;
        case 'S':
          ok = detail::read_digits(text, pos, 2, sec);
          if (ok && pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
          }
          break;
        case '%':
          ok = pos < text.size() && text[pos] == '%';
          ++pos;
          break;
        default:
          throw UsageError("unsupported timestamp format specifier: %" + std::string(1, spec));
      }
      if (!ok) throw DataError("malformed timestamp: '" + std::string(text) + "'");
    } else {
      if (pos >= text.size() || text[pos] != format[f])
        throw DataError("malformed timestamp: '" + std::string(text) + "'");
      ++pos;
    }
  }
  if (pos != text.size()) throw DataError("malformed timestamp: '" + std::string(text) + "'");
  if (mon < 1 || mon > 12 || day < 1 || day > 31 || hour > 23 || min > 59 || sec > 60)
    throw DataError("timestamp field out of range: '" + std::string(text) + "'");
  return detail::days_from_civil(year, static_cast<unsigned>(mon), static_cast<unsigned>(day)) * 86400 +
         hour * 3600 + min * 60 + sec;
}

inline std::string format_timestamp(std::int64_t ts, std::string_view format) {
  const std::int64_t days = detail::floor_div(ts, 86400);
  std::int64_t tod = ts - days * 86400;
  std::int64_t year;
  unsigned mon, day;
  detail::civil_from_days(days, year, mon, day);
  std::string out;
  char buf[32];
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] == '%' && f + 1 < format.size()) {
      const char spec = format[++f];
      switch (spec) {
        case 'Y': std::snprintf(buf, sizeof buf, "%04lld", static_cast<long long>(year)); out += buf; break;
        case 'm': std::snprintf(buf, sizeof buf, "%02u", mon); out += buf; break;
        case 'd': std::snprintf(buf, sizeof buf, "%02u", day); out += buf; break;
        case 'H': std::snprintf(buf, sizeof buf, "%02lld", static_cast<long long>(tod / 3600)); out += buf; break;
        case 'M': std::snprintf(buf, sizeof buf, "%02lld", static_cast<long long>((tod / 60) % 60)); out += buf; break;
        case 'S': std::snprintf(buf, sizeof buf, "%02lld", static_cast<long long>(tod % 60)); out += buf; break;
        case '%': out += '%'; break;
        default:
          throw UsageError("unsupported timestamp format specifier: %" + std::string(1, spec));
      }
    } else {
      out += format[f];
    }
  }
  return out;
}

// Seconds elapsed since the most recent UTC midnight.
inline std::int64_t seconds_since_midnight(std::int64_t ts) {
  const std::int64_t days = detail::floor_div(ts, 86400);
  return ts - days * 86400;
}

// Day of week with Monday = 0. The epoch (1970-01-01) was a Thursday.
inline int day_of_week_monday0(std::int64_t ts) {
  const std::int64_t days = detail::floor_div(ts, 86400);
  std::int64_t dow = (days + 3) % 7;
  if (dow < 0) dow += 7;
  return static_cast<int>(dow);
}

}  // namespace procast
