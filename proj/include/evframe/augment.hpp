#pragma once

// Training-time augmentation: view transforms with matching label transforms, variable-length
// event windows, and count-based noise suppression.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evframe/event.hpp"
#include "evframe/keypoints.hpp"
#include "evframe/representation.hpp"
#include "evframe/segmentation.hpp"

namespace evframe {

struct CropRect {
  std::uint32_t x0 = 0;
  std::uint32_t y0 = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  friend bool operator==(const CropRect&, const CropRect&) = default;
};

struct AugmentSpec {
  SensorGeometry input_size;  // frame the spec applies to
  int quarter_turns = 0;      // clockwise on screen (y down): (x, y) -> (H - 1 - y, x)
  double angle_deg = 0.0;     // extra small-angle rotation about the frame center, same sense
  std::optional<CropRect> crop;  // in rotated-frame pixels; empty means the whole frame
  double length_multiplier = 1.0;
  double noise_threshold = 0.0;
  int filter_size = 3;
  std::uint64_t seed = 0;

  friend bool operator==(const AugmentSpec&, const AugmentSpec&) = default;
};

inline SensorGeometry rotated_size(SensorGeometry g, int quarter_turns) {
  return (quarter_turns & 1) ? SensorGeometry{g.height, g.width} : g;
}

inline void validate(const AugmentSpec& spec) {
  require_valid(spec.input_size);
  if (spec.quarter_turns < 0 || spec.quarter_turns > 3) {
    throw std::invalid_argument("quarter_turns must be in [0, 3]");
  }
  if (!(spec.length_multiplier > 0.0)) {
    throw std::invalid_argument("length_multiplier must be > 0");
  }
  if (spec.filter_size <= 0 || spec.filter_size % 2 == 0) {
    throw std::invalid_argument("filter size must be odd and positive, got " +
                                std::to_string(spec.filter_size));
  }
  if (!(spec.noise_threshold >= 0.0)) throw std::invalid_argument("noise threshold must be >= 0");
  if (spec.crop) {
    const auto g = rotated_size(spec.input_size, spec.quarter_turns);
    const auto& c = *spec.crop;
    if (c.width == 0 || c.height == 0 || std::uint64_t{c.x0} + c.width > g.width ||
        std::uint64_t{c.y0} + c.height > g.height) {
      throw std::out_of_range("crop [" + std::to_string(c.x0) + ", " + std::to_string(c.y0) +
                              ", " + std::to_string(c.width) + "x" + std::to_string(c.height) +
                              "] outside frame " + to_string(g));
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Noise suppression: keep (x, y, p) iff mean of EC over the sigma x sigma neighborhood (zero
// padded) exceeds epsilon.

struct NoiseMask {
  SensorGeometry geometry;
  std::vector<std::uint8_t> keep;  // [polarity][pixel], 1 = keep

  bool kept(Polarity p, std::uint32_t x, std::uint32_t y) const noexcept {
    return keep[polarity_index(p) * geometry.pixel_count() +
                static_cast<std::size_t>(y) * geometry.width + x] != 0;
  }
  std::size_t kept_count() const noexcept {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
  }
};

namespace detail {

inline void require_ec(const Frame& ec) {
  if (ec.channels != channels_of(Representation::Ec)) {
    throw std::invalid_argument("noise suppression needs an [EC+, EC-] frame");
  }
}

inline void require_odd(int sigma) {
  if (sigma <= 0 || sigma % 2 == 0) {
    throw std::invalid_argument("filter size must be odd and positive, got " +
                                std::to_string(sigma));
  }
}

}  // namespace detail

/// sigma x sigma box mean of each EC channel with zero padding, via an integral image.
inline std::vector<double> smoothed_counts(const Frame& ec, int sigma) {
  detail::require_ec(ec);
  detail::require_odd(sigma);
  const std::size_t w = ec.geometry.width;
  const std::size_t h = ec.geometry.height;
  const auto r = static_cast<std::ptrdiff_t>(sigma / 2);
  const double area = static_cast<double>(sigma) * sigma;
  std::vector<double> out(ec.data.size());
  std::vector<double> integral((w + 1) * (h + 1));
  for (std::size_t c = 0; c < 2; ++c) {
    const auto plane = ec.plane(c);
    std::fill(integral.begin(), integral.end(), 0.0);
    for (std::size_t y = 0; y < h; ++y) {
      double row = 0.0;
      for (std::size_t x = 0; x < w; ++x) {
        row += plane[y * w + x];
        integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
      }
    }
    const auto clamp = [](std::ptrdiff_t v, std::size_t n) {
      return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n)));
    };
    for (std::size_t y = 0; y < h; ++y) {
      const auto y0 = clamp(static_cast<std::ptrdiff_t>(y) - r, h);
      const auto y1 = clamp(static_cast<std::ptrdiff_t>(y) + r + 1, h);
      for (std::size_t x = 0; x < w; ++x) {
        const auto x0 = clamp(static_cast<std::ptrdiff_t>(x) - r, w);
        const auto x1 = clamp(static_cast<std::ptrdiff_t>(x) + r + 1, w);
        const double sum = integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] -
                           integral[y1 * (w + 1) + x0] + integral[y0 * (w + 1) + x0];
        out[c * w * h + y * w + x] = sum / area;
      }
    }
  }
  return out;
}

inline NoiseMask noise_mask(const Frame& ec, int sigma, double epsilon) {
  const auto smooth = smoothed_counts(ec, sigma);
  NoiseMask mask{ec.geometry, std::vector<std::uint8_t>(smooth.size())};
  for (std::size_t i = 0; i < smooth.size(); ++i) mask.keep[i] = smooth[i] > epsilon ? 1 : 0;
  return mask;
}

/// Zeroes every channel value whose (pixel, channel polarity) the mask rejects.
inline Frame apply_mask(Frame frame, const NoiseMask& mask) {
  if (frame.geometry != mask.geometry) {
    throw std::invalid_argument("noise mask geometry " + to_string(mask.geometry) +
                                " does not match frame " + to_string(frame.geometry));
  }
  const std::size_t plane = frame.plane_size();
  for (std::size_t c = 0; c < frame.channel_count(); ++c) {
    const std::size_t base = polarity_index(channel_polarity(frame.channels[c])) * plane;
    auto values = frame.plane(c);
    for (std::size_t i = 0; i < plane; ++i) {
      if (!mask.keep[base + i]) values[i] = 0.0f;
    }
  }
  return frame;
}

/// One mask from `ec`, applied uniformly to every frame.
inline std::vector<Frame> suppress_noise(std::span<const Frame> frames, const Frame& ec, int sigma,
                                         double epsilon) {
  const auto mask = noise_mask(ec, sigma, epsilon);
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(apply_mask(f, mask));
  return out;
}

inline Frame suppress_noise(const Frame& frame, const Frame& ec, int sigma, double epsilon) {
  return apply_mask(frame, noise_mask(ec, sigma, epsilon));
}

// ---------------------------------------------------------------------------------------------
// Geometric transforms. Pixel centers sit at integer coordinates, so a keypoint at (u, v) and
// the pixel (u, v) follow the same map.

inline Frame rotate_quarter_turns(const Frame& in, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  if (quarter_turns == 0) return in;
  Frame cur = in;
  for (int k = 0; k < quarter_turns; ++k) {
    const auto g = cur.geometry;
    Frame next(cur.channels, SensorGeometry{g.height, g.width});
    for (std::size_t c = 0; c < cur.channel_count(); ++c) {
      for (std::uint32_t y = 0; y < g.height; ++y) {
        for (std::uint32_t x = 0; x < g.width; ++x) {
          next.at(c, g.height - 1 - y, x) = cur.at(c, x, y);
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

/// Nearest-neighbour rotation about the frame center; values never interpolate.
inline Frame rotate_small_angle(const Frame& in, double angle_deg) {
  if (angle_deg == 0.0) return in;
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(a);
  const double sn = std::sin(a);
  const auto g = in.geometry;
  const double cx = (g.width - 1) / 2.0;
  const double cy = (g.height - 1) / 2.0;
  Frame out(in.channels, g);
  for (std::uint32_t y = 0; y < g.height; ++y) {
    for (std::uint32_t x = 0; x < g.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const auto sx = std::lround(cs * dx + sn * dy + cx);
      const auto sy = std::lround(-sn * dx + cs * dy + cy);
      if (sx < 0 || sy < 0 || sx >= static_cast<long>(g.width) ||
          sy >= static_cast<long>(g.height)) {
        continue;
      }
      for (std::size_t c = 0; c < in.channel_count(); ++c) {
        out.at(c, x, y) = in.at(c, static_cast<std::uint32_t>(sx), static_cast<std::uint32_t>(sy));
      }
    }
  }
  return out;
}

inline Frame crop_frame(const Frame& in, const CropRect& r) {
  if (r.width == 0 || r.height == 0 || std::uint64_t{r.x0} + r.width > in.geometry.width ||
      std::uint64_t{r.y0} + r.height > in.geometry.height) {
    throw std::out_of_range("crop outside frame " + to_string(in.geometry));
  }
  Frame out(in.channels, SensorGeometry{r.width, r.height});
  for (std::size_t c = 0; c < in.channel_count(); ++c) {
    for (std::uint32_t y = 0; y < r.height; ++y) {
      for (std::uint32_t x = 0; x < r.width; ++x) out.at(c, x, y) = in.at(c, r.x0 + x, r.y0 + y);
    }
  }
  return out;
}

/// The label-side map matching `apply_geometric` on the frame.
inline std::array<double, 2> transform_point(std::array<double, 2> p, const AugmentSpec& spec) {
  auto g = spec.input_size;
  for (int k = 0; k < spec.quarter_turns; ++k) {
    p = {static_cast<double>(g.height) - 1.0 - p[1], p[0]};
    g = SensorGeometry{g.height, g.width};
  }
  if (spec.angle_deg != 0.0) {
    const double a = spec.angle_deg * std::numbers::pi / 180.0;
    const double cx = (g.width - 1) / 2.0;
    const double cy = (g.height - 1) / 2.0;
    const double dx = p[0] - cx;
    const double dy = p[1] - cy;
    p = {std::cos(a) * dx - std::sin(a) * dy + cx, std::sin(a) * dx + std::cos(a) * dy + cy};
  }
  if (spec.crop) p = {p[0] - spec.crop->x0, p[1] - spec.crop->y0};
  return p;
}

inline Keypoints2D transform_keypoints(const Keypoints2D& kp, const AugmentSpec& spec) {
  Keypoints2D out;
  for (std::size_t j = 0; j < kJointCount; ++j) out.joints[j] = transform_point(kp.joints[j], spec);
  return out;
}

struct GeometricResult {
  Frame frame;
  Keypoints2D keypoints;
};

/// Rotate by quarter turns, then by the small angle, then crop. Keypoints follow the same map.
inline GeometricResult apply_geometric(const Frame& frame, const Keypoints2D& keypoints,
                                       AugmentSpec spec) {
  spec.input_size = frame.geometry;
  validate(spec);
  Frame out = rotate_small_angle(rotate_quarter_turns(frame, spec.quarter_turns), spec.angle_deg);
  if (spec.crop) out = crop_frame(out, *spec.crop);
  return {std::move(out), transform_keypoints(keypoints, spec)};
}

/// Event-side quarter-turn rotation; timestamps and order are untouched.
inline EventStream rotate_events(const EventStream& stream, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  auto g = stream.geometry();
  std::vector<Event> events(stream.events().begin(), stream.events().end());
  for (int k = 0; k < quarter_turns; ++k) {
    for (auto& e : events) {
      const auto x = e.x;
      e.x = static_cast<std::uint16_t>(g.height - 1 - e.y);
      e.y = x;
    }
    g = SensorGeometry{g.height, g.width};
  }
  return EventStream(std::move(events), g);
}

/// Keeps events inside `r`, translated to the crop origin.
inline EventStream crop_events(const EventStream& stream, const CropRect& r) {
  const auto g = stream.geometry();
  if (r.width == 0 || r.height == 0 || std::uint64_t{r.x0} + r.width > g.width ||
      std::uint64_t{r.y0} + r.height > g.height) {
    throw std::out_of_range("crop outside sensor " + to_string(g));
  }
  std::vector<Event> events;
  for (const auto& e : stream.events()) {
    if (e.x >= r.x0 && e.x < r.x0 + r.width && e.y >= r.y0 && e.y < r.y0 + r.height) {
      events.push_back(Event{e.t, static_cast<std::uint16_t>(e.x - r.x0),
                             static_cast<std::uint16_t>(e.y - r.y0), e.p});
    }
  }
  return EventStream(std::move(events), SensorGeometry{r.width, r.height});
}

// ---------------------------------------------------------------------------------------------

/// window_before with round(base_n * multiplier) events; the label belongs to `anchor_t`.
inline Segment variable_length_segment(const EventStream& stream, Timestamp anchor_t,
                                       std::size_t base_n, double multiplier) {
  if (!(multiplier > 0.0)) throw std::invalid_argument("multiplier must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(base_n) * multiplier));
  return window_before(stream, anchor_t, std::max<std::size_t>(n, 1));
}

// ---------------------------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentRanges {
  SensorGeometry frame;                      // size of the frames the specs will apply to
  std::vector<int> quarter_turns{0};         // drawn uniformly from this set
  Interval angle_deg{0.0, 0.0};
  Interval crop_fraction{1.0, 1.0};          // crop side / rotated frame side
  Interval length_multiplier{1.0, 1.0};
  Interval noise_threshold{0.0, 2.0};        // counts
  std::vector<int> filter_sizes{3};
};

/// Deterministic in `seed`.
inline AugmentSpec sample_augment(const AugmentRanges& ranges, std::uint64_t seed) {
  require_valid(ranges.frame);
  const auto check = [](const Interval& i, const char* name) {
    if (!(i.lo <= i.hi)) throw std::invalid_argument(std::string("empty range for ") + name);
  };
  check(ranges.angle_deg, "angle_deg");
  check(ranges.crop_fraction, "crop_fraction");
  check(ranges.length_multiplier, "length_multiplier");
  check(ranges.noise_threshold, "noise_threshold");
  if (ranges.quarter_turns.empty()) throw std::invalid_argument("empty range for quarter_turns");
  if (ranges.filter_sizes.empty()) throw std::invalid_argument("empty range for filter_sizes");
  if (ranges.crop_fraction.lo <= 0.0 || ranges.crop_fraction.hi > 1.0) {
    throw std::invalid_argument("crop_fraction must lie in (0, 1]");
  }

  std::mt19937_64 rng(seed);
  const auto uniform = [&rng](const Interval& i) {
    if (i.lo == i.hi) return i.lo;
    return std::uniform_real_distribution<double>(i.lo, i.hi)(rng);
  };
  const auto pick = [&rng](const std::vector<int>& v) {
    if (v.size() == 1) return v.front();
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  AugmentSpec spec;
  spec.input_size = ranges.frame;
  spec.seed = seed;
  spec.quarter_turns = pick(ranges.quarter_turns);
  spec.angle_deg = uniform(ranges.angle_deg);
  const auto g = rotated_size(ranges.frame, spec.quarter_turns);
  const double frac = uniform(ranges.crop_fraction);
  if (frac < 1.0) {
    CropRect r;
    r.width = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(frac * g.width)));
    r.height = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(frac * g.height)));
    r.x0 = std::uniform_int_distribution<std::uint32_t>(0, g.width - r.width)(rng);
    r.y0 = std::uniform_int_distribution<std::uint32_t>(0, g.height - r.height)(rng);
    spec.crop = r;
  }
  spec.length_multiplier = uniform(ranges.length_multiplier);
  spec.noise_threshold = uniform(ranges.noise_threshold);
  spec.filter_size = pick(ranges.filter_sizes);
  validate(spec);
  return spec;
}

}  // namespace evframe
