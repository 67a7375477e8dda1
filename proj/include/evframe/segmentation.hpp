#pragma once

#include <charconv>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evframe/event.hpp"

namespace evframe {

enum class TailPolicy { Drop, EmitPartial };

namespace detail {

inline Segment make_segment(const EventStream& stream, std::size_t begin, std::size_t end,
                            Timestamp t_start, Timestamp t_end, Provenance provenance,
                            bool capped = false) {
  return Segment{stream.events().subspan(begin, end - begin),
                 t_start,
                 t_end,
                 stream.geometry(),
                 provenance,
                 begin,
                 capped};
}

// Bounds [first t, last t + 1us) for an event-defined segment.
inline Segment make_tight_segment(const EventStream& stream, std::size_t begin, std::size_t end,
                                  Provenance provenance, bool capped = false) {
  const auto ev = stream.events();
  return make_segment(stream, begin, end, ev[begin].t, saturating_next(ev[end - 1].t), provenance,
                      capped);
}

}  // namespace detail

/// Consecutive non-overlapping segments of exactly `n` events.
inline std::vector<Segment> segment_by_count(const EventStream& stream, std::size_t n,
                                             TailPolicy tail) {
  if (n == 0) throw std::invalid_argument("segment_by_count: n must be >= 1");
  std::vector<Segment> out;
  out.reserve(stream.size() / n + 1);
  std::size_t begin = 0;
  for (; begin + n <= stream.size(); begin += n) {
    out.push_back(detail::make_tight_segment(stream, begin, begin + n, ByCount{n}));
  }
  if (begin < stream.size() && tail == TailPolicy::EmitPartial) {
    out.push_back(detail::make_tight_segment(stream, begin, stream.size(), ByCount{n}));
  }
  return out;
}

/// Windows [t_first + i*dt, t_first + (i+1)*dt) tiling [t_first, t_last + 1). Empty windows
/// are emitted. The last window is partial when it extends past t_last + 1; its nominal end is
/// clipped to t_last + 1.
inline std::vector<Segment> segment_by_time(const EventStream& stream, Duration dt,
                                            TailPolicy tail) {
  if (dt == 0) throw std::invalid_argument("segment_by_time: dt must be >= 1us");
  std::vector<Segment> out;
  if (stream.empty()) return out;
  const auto ev = stream.events();
  const Timestamp first = ev.front().t;
  const Timestamp end = saturating_next(ev.back().t);
  const std::uint64_t span = end - first;
  const std::uint64_t windows = span / dt + (span % dt != 0 ? 1 : 0);
  out.reserve(windows);

  std::size_t cursor = 0;
  for (std::uint64_t i = 0; i < windows; ++i) {
    const Timestamp w0 = first + i * dt;
    const bool partial = span - i * dt < dt;
    if (partial && tail == TailPolicy::Drop) break;
    const Timestamp w1 = partial ? end : w0 + dt;
    std::size_t stop = cursor;
    while (stop < ev.size() && ev[stop].t < w1) ++stop;
    out.push_back(detail::make_segment(stream, cursor, stop, w0, w1, ByTime{dt}));
    cursor = stop;
  }
  return out;
}

/// Each segment is the shortest prefix of the remaining stream covering `k` distinct (x, y)
/// locations, polarity ignored. A segment reaching `max_events` first is closed and flagged
/// `capped`. A trailing segment that runs out of events before reaching `k` is the tail.
inline std::vector<Segment> segment_by_active_pixels(const EventStream& stream, std::size_t k,
                                                     std::size_t max_events, TailPolicy tail) {
  if (k == 0) throw std::invalid_argument("segment_by_active_pixels: k must be >= 1");
  if (max_events == 0) {
    throw std::invalid_argument("segment_by_active_pixels: max_events must be >= 1");
  }
  std::vector<Segment> out;
  const auto ev = stream.events();
  const auto width = stream.geometry().width;
  // Generation stamps avoid clearing the seen-map between segments.
  std::vector<std::uint32_t> seen(stream.geometry().pixel_count(), 0);
  std::uint32_t generation = 1;

  std::size_t begin = 0;
  while (begin < ev.size()) {
    std::size_t distinct = 0;
    std::size_t i = begin;
    bool closed = false;
    bool capped = false;
    while (i < ev.size()) {
      auto& mark = seen[static_cast<std::size_t>(ev[i].y) * width + ev[i].x];
      if (mark != generation) {
        mark = generation;
        ++distinct;
      }
      ++i;
      if (distinct == k) {
        closed = true;
        break;
      }
      if (i - begin == max_events) {
        closed = true;
        capped = true;
        break;
      }
    }
    if (closed || tail == TailPolicy::EmitPartial) {
      out.push_back(detail::make_tight_segment(stream, begin, i, ByActivePixels{k}, capped));
    }
    begin = i;
    if (++generation == 0) {
      std::fill(seen.begin(), seen.end(), 0);
      generation = 1;
    }
  }
  return out;
}

/// The last min(n, available) events with t <= t_query. Bounds are [first t, t_query + 1), or
/// the empty range [t_query + 1, t_query + 1) when nothing precedes the query.
inline Segment window_before(const EventStream& stream, Timestamp t_query, std::size_t n) {
  if (n == 0) throw std::invalid_argument("window_before: n must be >= 1");
  const auto ev = stream.events();
  const auto upper = std::upper_bound(ev.begin(), ev.end(), t_query,
                                      [](Timestamp t, const Event& e) { return t < e.t; });
  const auto end = static_cast<std::size_t>(upper - ev.begin());
  const auto begin = end > n ? end - n : 0;
  const Timestamp t_end = saturating_next(t_query);
  if (begin == end) return detail::make_segment(stream, begin, end, t_end, t_end, Window{n});
  return detail::make_segment(stream, begin, end, ev[begin].t, t_end, Window{n});
}

/// Parsed form of the command-line segment mini-language:
/// `count:N`, `time:MS`, `pixels:K`, `window:N@T` (T in microseconds).
struct SegmentSpec {
  enum class Kind { Count, Time, Pixels, Window } kind = Kind::Count;
  std::size_t n = 10'000;  // events for count and window, active pixels for pixels
  Duration dt = 0;         // microseconds, time only
  Timestamp anchor = 0;    // window only
};

inline SegmentSpec parse_segment_spec(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("segment spec needs kind:value, got '" + std::string(text) + "'");
  }
  const auto kind = text.substr(0, colon);
  auto rest = text.substr(colon + 1);
  const auto number = [&text](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw std::invalid_argument("bad number in segment spec '" + std::string(text) + "'");
    }
    return v;
  };
  SegmentSpec spec;
  if (kind == "count") {
    spec.kind = SegmentSpec::Kind::Count;
    spec.n = number(rest);
  } else if (kind == "time") {
    spec.kind = SegmentSpec::Kind::Time;
    const auto ms = number(rest);
    if (ms > std::numeric_limits<Duration>::max() / 1000) {
      throw std::invalid_argument("time window too long");
    }
    spec.dt = ms * 1000;
  } else if (kind == "pixels") {
    spec.kind = SegmentSpec::Kind::Pixels;
    spec.n = number(rest);
  } else if (kind == "window") {
    spec.kind = SegmentSpec::Kind::Window;
    const auto at = rest.find('@');
    if (at == std::string_view::npos) throw std::invalid_argument("window spec needs N@T");
    spec.n = number(rest.substr(0, at));
    spec.anchor = number(rest.substr(at + 1));
  } else {
    throw std::invalid_argument("unknown segment kind '" + std::string(kind) + "'");
  }
  if (spec.kind == SegmentSpec::Kind::Time ? spec.dt == 0 : spec.n == 0) {
    throw std::invalid_argument("segment spec value must be positive");
  }
  return spec;
}

/// `max_events` caps active-pixel segments; 0 means no cap.
inline std::vector<Segment> segment(const EventStream& stream, const SegmentSpec& spec,
                                    TailPolicy tail, std::size_t max_events = 0) {
  switch (spec.kind) {
    case SegmentSpec::Kind::Count:
      return segment_by_count(stream, spec.n, tail);
    case SegmentSpec::Kind::Time:
      return segment_by_time(stream, spec.dt, tail);
    case SegmentSpec::Kind::Pixels:
      return segment_by_active_pixels(
          stream, spec.n, max_events == 0 ? std::numeric_limits<std::size_t>::max() : max_events, tail);
    case SegmentSpec::Kind::Window:
      return {window_before(stream, spec.anchor, spec.n)};
  }
  return {};
}

}  // namespace evframe
