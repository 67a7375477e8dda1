#pragma once

// Shared test helpers: seeded generators and a direct, per-pixel evaluation of the
// representation formulas used as an oracle for the streaming renderers.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "evframe/event.hpp"
#include "evframe/representation.hpp"

namespace evframe::testing {

inline EventStream random_stream(std::mt19937_64& rng, SensorGeometry g, std::size_t n,
                                 Timestamp t_max = 1'000'000) {
  std::uniform_int_distribution<Timestamp> t(0, t_max);
  std::uniform_int_distribution<std::uint32_t> x(0, g.width - 1);
  std::uniform_int_distribution<std::uint32_t> y(0, g.height - 1);
  std::bernoulli_distribution pos(0.5);
  std::vector<Event> ev(n);
  for (auto& e : ev) {
    e = Event{t(rng), static_cast<std::uint16_t>(x(rng)), static_cast<std::uint16_t>(y(rng)),
              pos(rng) ? Polarity::Pos : Polarity::Neg};
  }
  return EventStream::from_unsorted(std::move(ev), g);
}

inline Segment whole(const EventStream& s) {
  if (s.empty()) return Segment{s.events(), 0, 0, s.geometry(), ByCount{0}, 0, false};
  return Segment{s.events(), s.events().front().t, s.events().back().t + 1, s.geometry(),
                 ByCount{s.size()}, 0, false};
}

/// Reference values per (x_out, y_out, polarity index), in double precision.
struct ReferenceFrames {
  SensorGeometry out;
  std::map<std::tuple<std::uint32_t, std::uint32_t, int>, std::vector<Timestamp>> by_pixel;
  Timestamp t_min = 0;
  Timestamp t_max = 0;
  double peak_count = 0;

  double ec(std::uint32_t x, std::uint32_t y, int p) const {
    const auto it = by_pixel.find({x, y, p});
    return it == by_pixel.end() ? 0.0 : static_cast<double>(it->second.size());
  }
  double lnes(std::uint32_t x, std::uint32_t y, int p) const {
    const auto it = by_pixel.find({x, y, p});
    if (it == by_pixel.end()) return 0.0;
    if (t_max == t_min) return 1.0;
    const auto latest = *std::max_element(it->second.begin(), it->second.end());
    return static_cast<double>(latest - t_min) / static_cast<double>(t_max - t_min);
  }
  double lnec(std::uint32_t x, std::uint32_t y, int p) const {
    return peak_count == 0 ? 0.0 : ec(x, y, p) / peak_count;
  }
};

/// Groups events into {t_i | (x_i, y_i, p_i) = (x, y, p)} with independent floor binning.
inline ReferenceFrames reference(std::span<const Event> events, SensorGeometry in,
                                 SensorGeometry out) {
  ReferenceFrames r;
  r.out = out;
  for (const auto& e : events) {
    const auto bx = static_cast<std::uint32_t>(e.x * static_cast<std::uint64_t>(out.width) / in.width);
    const auto by = static_cast<std::uint32_t>(e.y * static_cast<std::uint64_t>(out.height) / in.height);
    r.by_pixel[{bx, by, e.p == Polarity::Pos ? 0 : 1}].push_back(e.t);
  }
  if (!events.empty()) {
    r.t_min = events.front().t;
    r.t_max = events.front().t;
    for (const auto& e : events) {
      r.t_min = std::min(r.t_min, e.t);
      r.t_max = std::max(r.t_max, e.t);
    }
  }
  for (const auto& [key, ts] : r.by_pixel) {
    r.peak_count = std::max(r.peak_count, static_cast<double>(ts.size()));
  }
  return r;
}

}  // namespace evframe::testing
