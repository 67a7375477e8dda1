#pragma once

// Event-to-frame representations.
//
//   EC(x,y,p)     number of events at (x,y,p)
//   LNES(x,y,p)   (latest t at (x,y,p) - min t) / (max t - min t), 0 where inactive
//   LNEC(x,y,p)   EC(x,y,p) / max over all (x,y,p) of EC
//   LNECS         [LNES+, LNES-, LNEC+, LNEC-]
//   LNEWCS(x,y,p) LNES(x,y,p) * LNEC(x,y,p)
//
// min/max t are taken over the segment's events. When they coincide every active pixel of LNES
// is 1. Frames are channel-major, row-major float32.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evframe/event.hpp"

namespace evframe {

enum class Channel : std::uint8_t {
  LnesPos,
  LnesNeg,
  LnecPos,
  LnecNeg,
  EcPos,
  EcNeg,
  LnewcsPos,
  LnewcsNeg,
};

inline constexpr std::string_view channel_name(Channel c) {
  constexpr std::array<std::string_view, 8> names{"LNES+", "LNES-",  "LNEC+",   "LNEC-",
                                                  "EC+",   "EC-",    "LNEWCS+", "LNEWCS-"};
  return names[static_cast<std::size_t>(c)];
}

inline constexpr Polarity channel_polarity(Channel c) {
  return static_cast<std::uint8_t>(c) % 2 == 0 ? Polarity::Pos : Polarity::Neg;
}

enum class Representation { Ec, Lnes, Lnec, Lnecs, Lnewcs };

inline constexpr std::string_view representation_name(Representation r) {
  switch (r) {
    case Representation::Ec: return "ec";
    case Representation::Lnes: return "lnes";
    case Representation::Lnec: return "lnec";
    case Representation::Lnecs: return "lnecs";
    case Representation::Lnewcs: return "lnewcs";
  }
  return "?";
}

inline Representation parse_representation(std::string_view name) {
  for (auto r : {Representation::Ec, Representation::Lnes, Representation::Lnec,
                 Representation::Lnecs, Representation::Lnewcs}) {
    if (representation_name(r) == name) return r;
  }
  throw std::invalid_argument("unknown representation '" + std::string(name) +
                              "' (expected ec, lnes, lnec, lnecs or lnewcs)");
}

inline std::vector<Channel> channels_of(Representation r) {
  switch (r) {
    case Representation::Ec: return {Channel::EcPos, Channel::EcNeg};
    case Representation::Lnes: return {Channel::LnesPos, Channel::LnesNeg};
    case Representation::Lnec: return {Channel::LnecPos, Channel::LnecNeg};
    case Representation::Lnecs:
      return {Channel::LnesPos, Channel::LnesNeg, Channel::LnecPos, Channel::LnecNeg};
    case Representation::Lnewcs: return {Channel::LnewcsPos, Channel::LnewcsNeg};
  }
  return {};
}

/// Multi-channel float raster. `channels` labels each plane; its length is the channel count.
struct Frame {
  std::vector<Channel> channels;
  SensorGeometry geometry;
  std::vector<float> data;

  Frame() = default;
  Frame(std::vector<Channel> labels, SensorGeometry g)
      : channels(std::move(labels)), geometry(g), data(channels.size() * g.pixel_count(), 0.0f) {}

  std::size_t channel_count() const noexcept { return channels.size(); }
  std::size_t plane_size() const noexcept { return geometry.pixel_count(); }

  float& at(std::size_t c, std::uint32_t x, std::uint32_t y) noexcept {
    return data[(c * geometry.height + y) * geometry.width + x];
  }
  float at(std::size_t c, std::uint32_t x, std::uint32_t y) const noexcept {
    return data[(c * geometry.height + y) * geometry.width + x];
  }
  std::span<float> plane(std::size_t c) noexcept {
    return std::span<float>(data).subspan(c * plane_size(), plane_size());
  }
  std::span<const float> plane(std::size_t c) const noexcept {
    return std::span<const float>(data).subspan(c * plane_size(), plane_size());
  }

  /// Copies channels [first, first + count) into a new frame.
  Frame slice(std::size_t first, std::size_t count) const {
    if (first + count > channel_count()) throw std::out_of_range("Frame::slice past last channel");
    Frame out({channels.begin() + static_cast<std::ptrdiff_t>(first),
               channels.begin() + static_cast<std::ptrdiff_t>(first + count)},
              geometry);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(first * plane_size()),
                count * plane_size(), out.data.begin());
    return out;
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Channel-wise concatenation; geometries must match.
inline Frame concatenate(const Frame& a, const Frame& b) {
  if (a.geometry != b.geometry) throw std::invalid_argument("concatenate: geometry mismatch");
  Frame out;
  out.geometry = a.geometry;
  out.channels = a.channels;
  out.channels.insert(out.channels.end(), b.channels.begin(), b.channels.end());
  out.data = a.data;
  out.data.insert(out.data.end(), b.data.begin(), b.data.end());
  return out;
}

/// Floor scaling from sensor resolution down to frame resolution.
class BinningMap {
 public:
  BinningMap(SensorGeometry in, SensorGeometry out) : in_(in), out_(out) {
    require_valid(in_);
    require_valid(out_);
    if (out_.width > in_.width || out_.height > in_.height) {
      throw std::invalid_argument("binning output " + to_string(out_) + " larger than input " +
                                  to_string(in_));
    }
    column_.resize(in_.width);
    row_.resize(in_.height);
    for (std::uint32_t x = 0; x < in_.width; ++x) {
      column_[x] = static_cast<std::uint32_t>(std::uint64_t{x} * out_.width / in_.width);
    }
    for (std::uint32_t y = 0; y < in_.height; ++y) {
      row_[y] = static_cast<std::uint32_t>(std::uint64_t{y} * out_.height / in_.height);
    }
  }

  static BinningMap identity(SensorGeometry g) { return BinningMap(g, g); }

  const SensorGeometry& in() const noexcept { return in_; }
  const SensorGeometry& out() const noexcept { return out_; }

  std::pair<std::uint32_t, std::uint32_t> operator()(std::uint32_t x, std::uint32_t y) const {
    if (!in_.contains(x, y)) {
      throw OutOfBoundsError("bin_coordinates: (" + std::to_string(x) + ", " + std::to_string(y) +
                             ") outside " + to_string(in_));
    }
    return {column_[x], row_[y]};
  }

  /// Unchecked flat output index.
  std::size_t index(std::uint32_t x, std::uint32_t y) const noexcept {
    return static_cast<std::size_t>(row_[y]) * out_.width + column_[x];
  }

  /// Continuous position mapping for labels, with pixel centers at integer coordinates.
  std::pair<double, double> map_point(double u, double v) const noexcept {
    const double sx = static_cast<double>(in_.width) / out_.width;
    const double sy = static_cast<double>(in_.height) / out_.height;
    return {(u + 0.5) / sx - 0.5, (v + 0.5) / sy - 0.5};
  }

 private:
  SensorGeometry in_;
  SensorGeometry out_;
  std::vector<std::uint32_t> column_;
  std::vector<std::uint32_t> row_;
};

inline std::pair<std::uint32_t, std::uint32_t> bin_coordinates(std::uint32_t x, std::uint32_t y,
                                                               const BinningMap& map) {
  return map(x, y);
}

namespace detail {

// Single pass over a segment: per (binned pixel, polarity) count and latest timestamp.
struct Accumulation {
  SensorGeometry geometry;
  std::vector<std::uint32_t> count;  // [polarity][pixel]
  std::vector<Timestamp> latest;     // valid where count > 0
  Timestamp t_min = 0;
  Timestamp t_max = 0;
  std::size_t events = 0;
};

inline void check_map(const Segment& seg, const BinningMap& map) {
  if (seg.geometry != map.in()) {
    throw std::invalid_argument("segment geometry " + to_string(seg.geometry) +
                                " does not match binning input " + to_string(map.in()));
  }
}

inline Accumulation accumulate(const Segment& seg, const BinningMap& map, bool with_time) {
  check_map(seg, map);
  Accumulation acc;
  acc.geometry = map.out();
  const std::size_t plane = acc.geometry.pixel_count();
  acc.count.assign(2 * plane, 0);
  if (with_time) acc.latest.assign(2 * plane, 0);
  acc.events = seg.size();
  if (seg.empty()) return acc;
  acc.t_min = seg.events.front().t;
  acc.t_max = seg.events.front().t;
  for (const Event& e : seg.events) {
    const std::size_t i = (e.p == Polarity::Pos ? 0 : plane) + map.index(e.x, e.y);
    ++acc.count[i];
    if (with_time) {
      acc.latest[i] = std::max(acc.latest[i], e.t);
      acc.t_min = std::min(acc.t_min, e.t);
      acc.t_max = std::max(acc.t_max, e.t);
    }
  }
  return acc;
}

inline void write_ec(const Accumulation& acc, std::span<float> out) {
  std::transform(acc.count.begin(), acc.count.end(), out.begin(),
                 [](std::uint32_t c) { return static_cast<float>(c); });
}

inline void write_lnes(const Accumulation& acc, std::span<float> out) {
  const double span = static_cast<double>(acc.t_max - acc.t_min);
  for (std::size_t i = 0; i < acc.count.size(); ++i) {
    if (acc.count[i] == 0) {
      out[i] = 0.0f;
    } else if (span == 0.0) {
      out[i] = 1.0f;
    } else {
      out[i] = static_cast<float>(static_cast<double>(acc.latest[i] - acc.t_min) / span);
    }
  }
}

inline void write_lnec(std::span<const float> ec, std::span<float> out) {
  const float peak = ec.empty() ? 0.0f : *std::max_element(ec.begin(), ec.end());
  if (peak <= 0.0f) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  const double inv = static_cast<double>(peak);
  for (std::size_t i = 0; i < ec.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(ec[i]) / inv);
  }
}

}  // namespace detail

inline Frame event_count(const Segment& seg, const BinningMap& map) {
  const auto acc = detail::accumulate(seg, map, false);
  Frame f(channels_of(Representation::Ec), map.out());
  detail::write_ec(acc, f.data);
  return f;
}

inline Frame lnes(const Segment& seg, const BinningMap& map) {
  const auto acc = detail::accumulate(seg, map, true);
  Frame f(channels_of(Representation::Lnes), map.out());
  detail::write_lnes(acc, f.data);
  return f;
}

/// Normalizes an EC frame by its global maximum over both polarities.
inline Frame lnec(const Frame& ec) {
  if (ec.channels != channels_of(Representation::Ec)) {
    throw std::invalid_argument("lnec expects an [EC+, EC-] frame");
  }
  Frame f(channels_of(Representation::Lnec), ec.geometry);
  detail::write_lnec(ec.data, f.data);
  return f;
}

inline Frame lnecs(const Segment& seg, const BinningMap& map) {
  const auto acc = detail::accumulate(seg, map, true);
  Frame f(channels_of(Representation::Lnecs), map.out());
  const std::size_t half = 2 * f.plane_size();
  std::vector<float> ec(half);
  detail::write_ec(acc, ec);
  detail::write_lnes(acc, std::span<float>(f.data).first(half));
  detail::write_lnec(ec, std::span<float>(f.data).subspan(half));
  return f;
}

inline Frame lnewcs(const Segment& seg, const BinningMap& map) {
  const auto acc = detail::accumulate(seg, map, true);
  Frame f(channels_of(Representation::Lnewcs), map.out());
  const std::size_t n = f.data.size();
  std::vector<float> ec(n);
  std::vector<float> normalized(n);
  detail::write_ec(acc, ec);
  detail::write_lnec(ec, normalized);
  detail::write_lnes(acc, f.data);
  for (std::size_t i = 0; i < n; ++i) f.data[i] *= normalized[i];
  return f;
}

inline Frame render(const Segment& seg, const BinningMap& map, Representation rep) {
  switch (rep) {
    case Representation::Ec: return event_count(seg, map);
    case Representation::Lnes: return lnes(seg, map);
    case Representation::Lnec: return lnec(event_count(seg, map));
    case Representation::Lnecs: return lnecs(seg, map);
    case Representation::Lnewcs: return lnewcs(seg, map);
  }
  throw std::invalid_argument("render: unknown representation");
}

}  // namespace evframe
