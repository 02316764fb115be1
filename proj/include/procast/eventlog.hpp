#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "procast/errors.hpp"
#include "procast/timeparse.hpp"

namespace procast {

struct Event {
  std::string activity;
  std::int64_t timestamp = 0;  // seconds since epoch, UTC

  friend bool operator==(const Event&, const Event&) = default;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;

  friend bool operator==(const Trace&, const Trace&) = default;
};

struct EventLog {
  std::vector<Trace> traces;

  std::size_t num_events() const {
    std::size_t n = 0;
    for (const auto& t : traces) n += t.events.size();
    return n;
  }

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

struct SplitLog {
  EventLog train;
  EventLog val;
  EventLog test;
};

struct CsvSchema {
  std::string case_column = "CaseID";
  std::string activity_column = "ActivityID";
  std::string timestamp_column = "CompleteTimestamp";
  std::string timestamp_format = "%Y-%m-%d %H:%M:%S";
};

namespace detail {

// Splits one CSV record. Double quotes wrap fields containing separators;
// "" inside a quoted field is a literal quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

// Reads a CSV event log. Events are grouped into traces by case id in order
// of first occurrence, then stably sorted by timestamp within each trace, so
// ties keep file order.
inline EventLog parse_csv(std::istream& in, const CsvSchema& schema = {}) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty event log: no header row");
  if (!header.empty() && header.back() == '\r') header.pop_back();

  const auto cols = detail::split_csv_line(header);
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return i;
    throw DataError("missing column '" + name + "' in header");
  };
  const std::size_t ci = find_col(schema.case_column);
  const std::size_t ai = find_col(schema.activity_column);
  const std::size_t ti = find_col(schema.timestamp_column);

  EventLog log;
  std::unordered_map<std::string, std::size_t> trace_index;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::size_t needed = std::max({ci, ai, ti}) + 1;
    if (fields.size() < needed)
      throw DataError("row " + std::to_string(row) + ": expected at least " +
                      std::to_string(needed) + " fields, got " + std::to_string(fields.size()));
    std::int64_t ts;
    try {
      ts = parse_timestamp(fields[ti], schema.timestamp_format);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(row) + ": " + e.what());
    }
    auto [it, inserted] = trace_index.try_emplace(fields[ci], log.traces.size());
    if (inserted) log.traces.push_back(Trace{fields[ci], {}});
    log.traces[it->second].events.push_back(Event{fields[ai], ts});
  }
  if (log.traces.empty()) throw DataError("empty event log: no data rows");
  for (auto& t : log.traces)
    std::stable_sort(t.events.begin(), t.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  return log;
}

inline EventLog parse_csv(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

inline std::string write_csv(const EventLog& log, const CsvSchema& schema = {}) {
  std::string out = detail::csv_escape(schema.case_column) + "," +
                    detail::csv_escape(schema.activity_column) + "," +
                    detail::csv_escape(schema.timestamp_column) + "\n";
  for (const auto& t : log.traces)
    for (const auto& e : t.events)
      out += detail::csv_escape(t.case_id) + "," + detail::csv_escape(e.activity) + "," +
             format_timestamp(e.timestamp, schema.timestamp_format) + "\n";
  return out;
}

// Chronological split by case start time. The first train_frac of cases form
// the train+validation pool, the rest are test; val_frac of the pool (at
// least one case) is validation, taken from the pool's tail.
inline SplitLog temporal_split(const EventLog& log, double train_frac = 2.0 / 3.0,
                               double val_frac = 0.2) {
  const std::size_t n = log.traces.size();
  if (n < 3) throw DataError("need at least 3 cases to split, got " + std::to_string(n));
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw UsageError("train fraction must be in (0,1)");
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw UsageError("validation fraction must be in (0,1)");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = log.traces[a];
    const auto& tb = log.traces[b];
    const std::int64_t sa = ta.events.empty() ? 0 : ta.events.front().timestamp;
    const std::int64_t sb = tb.events.empty() ? 0 : tb.events.front().timestamp;
    if (sa != sb) return sa < sb;
    return ta.case_id < tb.case_id;
  });

  const std::size_t pool = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  if (pool < 2 || pool >= n)
    throw DataError("split yields an empty part: pool=" + std::to_string(pool) + " of " + std::to_string(n));
  std::size_t val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(pool)));
  if (val == 0) val = 1;
  const std::size_t train = pool - val;

  SplitLog split;
  for (std::size_t i = 0; i < n; ++i) {
    const Trace& t = log.traces[order[i]];
    if (i < train) split.train.traces.push_back(t);
    else if (i < pool) split.val.traces.push_back(t);
    else split.test.traces.push_back(t);
  }
  return split;
}

struct LogStats {
  std::size_t num_cases = 0;
  std::size_t num_events = 0;
  std::size_t num_activities = 0;
  std::size_t max_trace_length = 0;
  std::size_t min_trace_length = 0;
  double mean_trace_length = 0.0;
  std::int64_t first_timestamp = 0;
  std::int64_t last_timestamp = 0;
};

inline LogStats validate_log(const EventLog& log) {
  if (log.traces.empty()) throw DataError("empty event log");
  LogStats s;
  s.num_cases = log.traces.size();
  std::set<std::string> activities;
  bool first = true;
  std::size_t min_len = 0, max_len = 0, total = 0;
  for (const auto& t : log.traces) {
    if (t.events.empty()) throw DataError("case '" + t.case_id + "' has no events");
    total += t.events.size();
    if (first || t.events.size() > max_len) max_len = t.events.size();
    if (first || t.events.size() < min_len) min_len = t.events.size();
    for (const auto& e : t.events) {
      activities.insert(e.activity);
      if (first) {
        s.first_timestamp = s.last_timestamp = e.timestamp;
        first = false;
      } else {
        s.first_timestamp = std::min(s.first_timestamp, e.timestamp);
        s.last_timestamp = std::max(s.last_timestamp, e.timestamp);
      }
    }
  }
  s.num_events = total;
  s.num_activities = activities.size();
  s.max_trace_length = max_len;
  s.min_trace_length = min_len;
  s.mean_trace_length = static_cast<double>(total) / static_cast<double>(s.num_cases);
  return s;
}

}  // namespace procast
