#pragma once

// Synthetic event camera.
//
// Each pixel tracks log intensity L(x, y, t) = sum over shapes of coverage * log(contrast) and
// fires an event of polarity sign(dL) every time L moves a further contrast threshold C away
// from the level of its previous event. Coverage ramps linearly over one pixel at shape edges,
// so intensity changes continuously and event times are interpolated between simulation steps.
// Steps are uniform in time and sized so that no keypoint moves more than `max_step_px` per
// step; two scenes that trace the same path at different speeds therefore produce the same
// events with rescaled timestamps.
//
// Background activity is a homogeneous Poisson process per pixel with random polarity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "evframe/event.hpp"
#include "evframe/keypoints.hpp"

namespace evframe {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Path {
  enum class Kind { Static, Linear, Circle, Sine };
  Kind kind = Kind::Static;
  Vec2 from;                 // Static: position. Linear: start. Circle/Sine: center.
  Vec2 to;                   // Linear: end. Sine: amplitude per axis.
  double radius = 0.0;       // Circle
  double revolutions = 1.0;  // Circle, over the whole duration
  double phase_deg = 0.0;    // Circle, Sine
  double frequency_hz = 1.0; // Sine

  /// `s` is the fraction of the scene duration elapsed, `seconds` the absolute time.
  Vec2 position(double s, double seconds) const {
    switch (kind) {
      case Kind::Static: return from;
      case Kind::Linear: return {from.x + (to.x - from.x) * s, from.y + (to.y - from.y) * s};
      case Kind::Circle: {
        const double a = 2.0 * std::numbers::pi * revolutions * s + phase_deg * std::numbers::pi / 180.0;
        return {from.x + radius * std::cos(a), from.y + radius * std::sin(a)};
      }
      case Kind::Sine: {
        const double w = std::sin(2.0 * std::numbers::pi * frequency_hz * seconds +
                                  phase_deg * std::numbers::pi / 180.0);
        return {from.x + to.x * w, from.y + to.y * w};
      }
    }
    return from;
  }
};

struct Shape {
  enum class Kind { Disc, Bar, Chain };
  Kind kind = Kind::Disc;
  double size = 5.0;      // disc radius; bar/chain stroke width
  double contrast = 2.0;  // intensity ratio of the shape against the background
  Path path;              // disc center, bar center, chain base joint

  // Bar
  double length = 20.0;
  double angle_deg = 0.0;
  double angular_velocity_deg_s = 0.0;

  // Chain: link i has length segment_lengths[i]; its angle relative to the previous link is
  // joint_angles_deg[i] + joint_amplitudes_deg[i] * sin(2 pi joint_frequency_hz t).
  std::vector<double> segment_lengths;
  std::vector<double> joint_angles_deg;
  std::vector<double> joint_amplitudes_deg;
  double joint_frequency_hz = 1.0;

  /// Keypoint slots in the 21-joint layout; empty assigns the next free slots in order.
  std::vector<std::size_t> slots;

  std::size_t keypoint_count() const {
    switch (kind) {
      case Kind::Disc: return 1;
      case Kind::Bar: return 3;
      case Kind::Chain: return segment_lengths.size() + 1;
    }
    return 0;
  }

  /// Disc: center. Bar: both endpoints then center. Chain: joints from the base outwards.
  std::vector<Vec2> keypoints(double s, double seconds) const {
    const Vec2 c = path.position(s, seconds);
    switch (kind) {
      case Kind::Disc: return {c};
      case Kind::Bar: {
        const double a = (angle_deg + angular_velocity_deg_s * seconds) * std::numbers::pi / 180.0;
        const double hx = 0.5 * length * std::cos(a);
        const double hy = 0.5 * length * std::sin(a);
        return {{c.x - hx, c.y - hy}, {c.x + hx, c.y + hy}, c};
      }
      case Kind::Chain: {
        std::vector<Vec2> joints{c};
        double heading = 0.0;
        const double wave = std::sin(2.0 * std::numbers::pi * joint_frequency_hz * seconds);
        for (std::size_t i = 0; i < segment_lengths.size(); ++i) {
          const double base = i < joint_angles_deg.size() ? joint_angles_deg[i] : 0.0;
          const double amp = i < joint_amplitudes_deg.size() ? joint_amplitudes_deg[i] : 0.0;
          heading += (base + amp * wave) * std::numbers::pi / 180.0;
          const Vec2 prev = joints.back();
          joints.push_back({prev.x + segment_lengths[i] * std::cos(heading),
                            prev.y + segment_lengths[i] * std::sin(heading)});
        }
        return joints;
      }
    }
    return {};
  }
};

struct NoiseOptions {
  double rate = 0.0;             // events per pixel per second
  double burst_hz = 0.0;         // > 0 bunches noise into periodic bursts (flicker)
  Duration burst_width_us = 500; // burst length when burst_hz > 0
};

struct SceneConfig {
  SensorGeometry geometry{240, 150};
  std::vector<Shape> shapes;
  double contrast_threshold = 0.2;
  Duration duration = 1'000'000;
  NoiseOptions noise;
  std::uint64_t seed = 0;
  double trajectory_rate_hz = 1000.0;
  double max_step_px = 0.25;
};

struct SimulationResult {
  EventStream events;
  Trajectory<2> trajectory;
};

namespace detail {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double s = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  s = clamp01(s);
  const double ex = p.x - (a.x + s * dx);
  const double ey = p.y - (a.y + s * dy);
  return std::sqrt(ex * ex + ey * ey);
}

// Pose of one shape at one instant.
struct Placed {
  const Shape* shape;
  std::vector<Vec2> points;
  double log_contrast;

  double coverage(Vec2 p) const {
    if (shape->kind == Shape::Kind::Disc) {
      const double d = std::hypot(p.x - points[0].x, p.y - points[0].y);
      return clamp01(shape->size - d + 0.5);
    }
    const double half = 0.5 * shape->size;
    double best = 0.0;
    const std::size_t links = shape->kind == Shape::Kind::Bar ? 1 : points.size() - 1;
    for (std::size_t i = 0; i < links; ++i) {
      best = std::max(best, clamp01(half - segment_distance(p, points[i], points[i + 1]) + 0.5));
    }
    return best;
  }

  double reach() const {
    return (shape->kind == Shape::Kind::Disc ? shape->size : 0.5 * shape->size) + 1.5;
  }
};

struct Box {
  long x0, y0, x1, y1;  // inclusive
  bool empty() const { return x1 < x0 || y1 < y0; }
};

inline Box merge(const Box& a, const Box& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

class Scene {
 public:
  explicit Scene(const SceneConfig& cfg) : cfg_(cfg) {}

  std::vector<Placed> place(double t_us) const {
    const double s = t_us / static_cast<double>(cfg_.duration);
    const double seconds = t_us * 1e-6;
    std::vector<Placed> out;
    out.reserve(cfg_.shapes.size());
    for (const auto& shape : cfg_.shapes) {
      out.push_back({&shape, shape.keypoints(s, seconds), std::log(shape.contrast)});
    }
    return out;
  }

  Box bounds(const std::vector<Placed>& placed) const {
    Box box{1, 1, 0, 0};
    for (const auto& p : placed) {
      const double r = p.reach();
      for (const auto& q : p.points) {
        const Box b{static_cast<long>(std::floor(q.x - r)), static_cast<long>(std::floor(q.y - r)),
                    static_cast<long>(std::ceil(q.x + r)), static_cast<long>(std::ceil(q.y + r))};
        box = merge(box, b);
      }
    }
    const long w = static_cast<long>(cfg_.geometry.width);
    const long h = static_cast<long>(cfg_.geometry.height);
    box.x0 = std::max(box.x0, 0L);
    box.y0 = std::max(box.y0, 0L);
    box.x1 = std::min(box.x1, w - 1);
    box.y1 = std::min(box.y1, h - 1);
    return box;
  }

  static double log_intensity(const std::vector<Placed>& placed, Vec2 p) {
    double l = 0.0;
    for (const auto& s : placed) l += s.coverage(p) * s.log_contrast;
    return l;
  }

 private:
  const SceneConfig& cfg_;
};

inline double keypoint_path_length(const SceneConfig& cfg) {
  constexpr int kProbes = 4096;
  double longest = 0.0;
  for (const auto& shape : cfg.shapes) {
    std::vector<double> length(shape.keypoint_count(), 0.0);
    auto prev = shape.keypoints(0.0, 0.0);
    for (int i = 1; i <= kProbes; ++i) {
      const double s = static_cast<double>(i) / kProbes;
      const auto cur = shape.keypoints(s, s * static_cast<double>(cfg.duration) * 1e-6);
      for (std::size_t j = 0; j < cur.size(); ++j) {
        length[j] += std::hypot(cur[j].x - prev[j].x, cur[j].y - prev[j].y);
      }
      prev = cur;
    }
    for (double l : length) longest = std::max(longest, l);
  }
  return longest;
}

inline std::vector<std::size_t> resolve_slots(const SceneConfig& cfg) {
  std::vector<std::size_t> slots;
  std::size_t next = 0;
  for (const auto& shape : cfg.shapes) {
    const auto n = shape.keypoint_count();
    if (!shape.slots.empty() && shape.slots.size() != n) {
      throw std::invalid_argument("shape declares " + std::to_string(shape.slots.size()) +
                                  " slots for " + std::to_string(n) + " keypoints");
    }
    for (std::size_t j = 0; j < n; ++j) {
      slots.push_back(shape.slots.empty() ? next++ : shape.slots[j]);
    }
  }
  std::vector<bool> used(kJointCount, false);
  for (auto s : slots) {
    if (s >= kJointCount) {
      throw std::invalid_argument("keypoint slot " + std::to_string(s) + " outside the " +
                                  std::to_string(kJointCount) + "-joint layout");
    }
    if (used[s]) throw std::invalid_argument("keypoint slot " + std::to_string(s) + " used twice");
    used[s] = true;
  }
  return slots;
}

inline std::vector<Event> background_noise(SensorGeometry g, const NoiseOptions& noise,
                                           Duration duration, std::uint64_t seed) {
  std::vector<Event> out;
  if (noise.rate <= 0.0 || duration == 0) return out;
  std::mt19937_64 rng(seed);
  const double mean = noise.rate * static_cast<double>(g.pixel_count()) *
                      static_cast<double>(duration) * 1e-6;
  const auto count = std::poisson_distribution<std::uint64_t>(mean)(rng);
  out.reserve(count);
  std::uniform_int_distribution<Timestamp> when(0, duration - 1);
  std::uniform_int_distribution<std::uint32_t> col(0, g.width - 1);
  std::uniform_int_distribution<std::uint32_t> row(0, g.height - 1);
  std::bernoulli_distribution positive(0.5);
  const double period = noise.burst_hz > 0.0 ? 1e6 / noise.burst_hz : 0.0;
  for (std::uint64_t i = 0; i < count; ++i) {
    Timestamp t = when(rng);
    if (period > 0.0) {
      const auto burst = std::floor(static_cast<double>(t) / period);
      const auto jitter = std::uniform_int_distribution<Duration>(
          0, std::max<Duration>(noise.burst_width_us, 1) - 1)(rng);
      t = std::min<Timestamp>(static_cast<Timestamp>(burst * period) + jitter, duration - 1);
    }
    const auto x = col(rng);
    const auto y = row(rng);
    out.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                        positive(rng) ? Polarity::Pos : Polarity::Neg});
  }
  std::stable_sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return out;
}

inline std::vector<Event> merge_events(std::span<const Event> a, std::span<const Event> b) {
  std::vector<Event> out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin(),
             [](const Event& l, const Event& r) { return l.t < r.t; });
  return out;
}

}  // namespace detail

inline void validate(const SceneConfig& cfg) {
  require_valid(cfg.geometry);
  if (cfg.geometry.width > 0xFFFF || cfg.geometry.height > 0xFFFF) {
    throw std::invalid_argument("scene geometry exceeds 16-bit coordinates");
  }
  if (cfg.duration == 0) throw std::invalid_argument("scene duration must be > 0");
  if (!(cfg.contrast_threshold > 0.0)) throw std::invalid_argument("contrast threshold must be > 0");
  if (!(cfg.noise.rate >= 0.0)) throw std::invalid_argument("noise rate must be >= 0");
  if (!(cfg.trajectory_rate_hz > 0.0)) throw std::invalid_argument("trajectory rate must be > 0");
  if (!(cfg.max_step_px > 0.0)) throw std::invalid_argument("max_step_px must be > 0");
  for (const auto& s : cfg.shapes) {
    if (!(s.size > 0.0)) throw std::invalid_argument("shape size must be > 0");
    if (!(s.contrast > 0.0)) throw std::invalid_argument("shape contrast must be > 0");
    if (s.kind == Shape::Kind::Chain && s.segment_lengths.empty()) {
      throw std::invalid_argument("chain shape needs at least one segment");
    }
  }
  (void)detail::resolve_slots(cfg);
}

/// Seeded background activity merged into `stream`; ties keep original events first.
inline EventStream add_noise(const EventStream& stream, double rate, Duration duration,
                             std::uint64_t seed, NoiseOptions options = {}) {
  if (!(rate >= 0.0)) throw std::invalid_argument("noise rate must be >= 0");
  options.rate = rate;
  const auto noise = detail::background_noise(stream.geometry(), options, duration, seed);
  if (noise.empty()) return stream;
  return EventStream(detail::merge_events(stream.events(), noise), stream.geometry());
}

inline Trajectory<2> scene_trajectory(const SceneConfig& cfg) {
  validate(cfg);
  const auto slots = detail::resolve_slots(cfg);
  detail::Scene scene(cfg);
  Trajectory<2> traj;
  const double period = 1e6 / cfg.trajectory_rate_hz;
  const auto sample_at = [&](Timestamp t) {
    Keypoints2D kp;
    std::vector<Vec2> points;
    for (const auto& placed : scene.place(static_cast<double>(t))) {
      points.insert(points.end(), placed.points.begin(), placed.points.end());
    }
    const std::array<double, 2> fill =
        points.empty() ? std::array<double, 2>{0.0, 0.0} : std::array<double, 2>{points[0].x, points[0].y};
    kp.joints.fill(fill);
    for (std::size_t i = 0; i < points.size(); ++i) kp.joints[slots[i]] = {points[i].x, points[i].y};
    traj.samples.push_back({t, kp});
  };
  for (std::uint64_t i = 0;; ++i) {
    const auto t = static_cast<Timestamp>(std::llround(static_cast<double>(i) * period));
    if (t >= cfg.duration) break;
    if (!traj.samples.empty() && t <= traj.samples.back().t) continue;
    sample_at(t);
  }
  sample_at(cfg.duration);
  return traj;
}

inline SimulationResult simulate(const SceneConfig& cfg) {
  validate(cfg);
  const auto& g = cfg.geometry;
  detail::Scene scene(cfg);
  const double duration = static_cast<double>(cfg.duration);
  const double threshold = cfg.contrast_threshold;

  std::vector<double> level(g.pixel_count(), 0.0);      // current log intensity
  std::vector<double> reference(g.pixel_count(), 0.0);  // log intensity at last event

  auto placed = scene.place(0.0);
  auto box = scene.bounds(placed);
  if (!box.empty()) {
    for (long y = box.y0; y <= box.y1; ++y) {
      for (long x = box.x0; x <= box.x1; ++x) {
        const auto i = static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x);
        level[i] = detail::Scene::log_intensity(placed, {static_cast<double>(x), static_cast<double>(y)});
        reference[i] = level[i];
      }
    }
  }

  const auto steps = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(detail::keypoint_path_length(cfg) / cfg.max_step_px)));
  std::vector<Event> signal;
  double t_prev = 0.0;
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double t_cur = duration * static_cast<double>(k) / static_cast<double>(steps);
    auto next = scene.place(t_cur);
    const auto next_box = scene.bounds(next);
    const auto region = detail::merge(box, next_box);
    if (!region.empty()) {
      for (long y = region.y0; y <= region.y1; ++y) {
        for (long x = region.x0; x <= region.x1; ++x) {
          const auto i = static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x);
          const double before = level[i];
          const double after =
              detail::Scene::log_intensity(next, {static_cast<double>(x), static_cast<double>(y)});
          if (after == before) continue;
          double& ref = reference[i];
          const auto emit = [&](Polarity p) {
            const double frac = (ref - before) / (after - before);
            const double t = t_prev + frac * (t_cur - t_prev);
            signal.push_back(Event{static_cast<Timestamp>(std::llround(t)), static_cast<std::uint16_t>(x),
                                   static_cast<std::uint16_t>(y), p});
          };
          while (after - ref >= threshold) {
            ref += threshold;
            emit(Polarity::Pos);
          }
          while (ref - after >= threshold) {
            ref -= threshold;
            emit(Polarity::Neg);
          }
          level[i] = after;
        }
      }
    }
    placed = std::move(next);
    box = next_box;
    t_prev = t_cur;
  }
  std::stable_sort(signal.begin(), signal.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });

  const auto noise = detail::background_noise(g, cfg.noise, cfg.duration, cfg.seed);
  auto events = noise.empty() ? std::move(signal) : detail::merge_events(signal, noise);
  return {EventStream(std::move(events), g), scene_trajectory(cfg)};
}

}  // namespace evframe
