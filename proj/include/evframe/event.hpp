#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace evframe {

// Microseconds.
using Timestamp = std::uint64_t;
using Duration = std::uint64_t;

enum class Polarity : std::int8_t { Neg = -1, Pos = 1 };

inline constexpr int polarity_index(Polarity p) noexcept {
  return p == Polarity::Pos ? 0 : 1;
}

struct Event {
  Timestamp t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Polarity p = Polarity::Pos;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  constexpr bool contains(std::uint32_t x, std::uint32_t y) const noexcept {
    return x < width && y < height;
  }
  constexpr std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * height;
  }
  constexpr bool valid() const noexcept { return width > 0 && height > 0; }

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

inline void require_valid(const SensorGeometry& g) {
  if (!g.valid()) {
    throw std::invalid_argument("sensor geometry must be non-empty, got " +
                                std::to_string(g.width) + "x" + std::to_string(g.height));
  }
}

inline std::string to_string(const SensorGeometry& g) {
  return std::to_string(g.width) + "x" + std::to_string(g.height);
}

class OutOfBoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Time-ordered, geometry-checked sequence of events. Immutable once built.
class EventStream {
 public:
  EventStream() = default;

  /// Takes events that are already non-decreasing in t. Throws on any invariant violation.
  EventStream(std::vector<Event> events, SensorGeometry geometry)
      : events_(std::move(events)), geometry_(geometry) {
    require_valid(geometry_);
    for (std::size_t i = 0; i < events_.size(); ++i) {
      check_bounds(events_[i], i);
      if (i > 0 && events_[i].t < events_[i - 1].t) {
        throw std::invalid_argument("events not time-ordered at index " + std::to_string(i));
      }
    }
  }

  /// Stable-sorts by timestamp before validating.
  static EventStream from_unsorted(std::vector<Event> events, SensorGeometry geometry) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return EventStream(std::move(events), geometry);
  }

  std::span<const Event> events() const noexcept { return events_; }
  const SensorGeometry& geometry() const noexcept { return geometry_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  const Event& operator[](std::size_t i) const noexcept { return events_[i]; }

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  void check_bounds(const Event& e, std::size_t index) const {
    if (!geometry_.contains(e.x, e.y)) {
      throw OutOfBoundsError("event " + std::to_string(index) + " at (" + std::to_string(e.x) +
                             ", " + std::to_string(e.y) + ") outside sensor " +
                             to_string(geometry_));
    }
  }

  std::vector<Event> events_;
  SensorGeometry geometry_{1, 1};
};

// How a segment was selected.
struct ByCount {
  std::size_t n;
  friend bool operator==(const ByCount&, const ByCount&) = default;
};
struct ByTime {
  Duration dt;
  friend bool operator==(const ByTime&, const ByTime&) = default;
};
struct ByActivePixels {
  std::size_t k;
  friend bool operator==(const ByActivePixels&, const ByActivePixels&) = default;
};
struct Window {
  std::size_t n;
  friend bool operator==(const Window&, const Window&) = default;
};
using Provenance = std::variant<ByCount, ByTime, ByActivePixels, Window>;

inline std::string to_string(const Provenance& p) {
  struct {
    std::string operator()(const ByCount& v) const { return "count:" + std::to_string(v.n); }
    std::string operator()(const ByTime& v) const { return "time_us:" + std::to_string(v.dt); }
    std::string operator()(const ByActivePixels& v) const {
      return "pixels:" + std::to_string(v.k);
    }
    std::string operator()(const Window& v) const { return "window:" + std::to_string(v.n); }
  } visitor;
  return std::visit(visitor, p);
}

/// Contiguous view into a parent stream's storage; the parent must outlive it.
/// `t_start`/`t_end` are the nominal half-open bounds, which need not coincide with the
/// first/last event timestamps.
struct Segment {
  std::span<const Event> events;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  SensorGeometry geometry;
  Provenance provenance = ByCount{0};
  std::size_t offset = 0;  // index of the first event in the parent stream
  bool capped = false;     // closed by a safety cap rather than its own criterion

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
};

inline Timestamp saturating_next(Timestamp t) noexcept {
  return t == std::numeric_limits<Timestamp>::max() ? t : t + 1;
}

/// All events with t0 <= t < t1.
inline Segment slice_time(const EventStream& stream, Timestamp t0, Timestamp t1) {
  if (t0 > t1) {
    throw std::invalid_argument("slice_time: t0 (" + std::to_string(t0) + ") > t1 (" +
                                std::to_string(t1) + ")");
  }
  const auto all = stream.events();
  const auto by_time = [](const Event& e, Timestamp t) { return e.t < t; };
  const auto first = std::lower_bound(all.begin(), all.end(), t0, by_time);
  const auto last = std::lower_bound(first, all.end(), t1, by_time);
  const auto offset = static_cast<std::size_t>(first - all.begin());
  return Segment{all.subspan(offset, static_cast<std::size_t>(last - first)),
                 t0,
                 t1,
                 stream.geometry(),
                 ByTime{t1 - t0},
                 offset,
                 false};
}

}  // namespace evframe
