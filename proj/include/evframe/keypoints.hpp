#pragma once

// 21-joint hand keypoints and keypoint trajectories.
//
// Slot order follows the usual hand-landmark layout: 0 wrist, 1-4 thumb, 5-8 index,
// 9-12 middle (9 = middle MCP), 13-16 ring, 17-20 little.
//
// Trajectory csv: header "t,j0u,j0v,...,j20u,j20v" (2D) or "t,j0x,j0y,j0z,..." (3D), one row
// per sample, t in microseconds.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evframe/event.hpp"

namespace evframe {

inline constexpr std::size_t kJointCount = 21;
inline constexpr std::size_t kWrist = 0;
inline constexpr std::size_t kMiddleMcp = 9;

template <std::size_t Dim>
struct KeypointSet {
  using Point = std::array<double, Dim>;
  static constexpr std::size_t dimension = Dim;

  std::array<Point, kJointCount> joints{};

  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;
};

using Keypoints2D = KeypointSet<2>;
using Keypoints3D = KeypointSet<3>;

template <std::size_t Dim>
double distance(const std::array<double, Dim>& a, const std::array<double, Dim>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < Dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

template <std::size_t Dim>
struct Trajectory {
  struct Sample {
    Timestamp t;
    KeypointSet<Dim> keypoints;
  };
  std::vector<Sample> samples;

  /// Linear interpolation, clamped to the first/last sample.
  KeypointSet<Dim> at(double t) const {
    if (samples.empty()) throw std::logic_error("Trajectory::at on empty trajectory");
    if (t <= static_cast<double>(samples.front().t)) return samples.front().keypoints;
    if (t >= static_cast<double>(samples.back().t)) return samples.back().keypoints;
    const auto it = std::upper_bound(samples.begin(), samples.end(), t,
                                     [](double v, const Sample& s) { return v < static_cast<double>(s.t); });
    const Sample& hi = *it;
    const Sample& lo = *(it - 1);
    const double w = (t - static_cast<double>(lo.t)) / static_cast<double>(hi.t - lo.t);
    KeypointSet<Dim> out;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      for (std::size_t d = 0; d < Dim; ++d) {
        out.joints[j][d] = lo.keypoints.joints[j][d] * (1.0 - w) + hi.keypoints.joints[j][d] * w;
      }
    }
    return out;
  }
};

namespace detail {

inline constexpr std::array<const char*, 3> kAxes2D{"u", "v", ""};
inline constexpr std::array<const char*, 3> kAxes3D{"x", "y", "z"};

template <std::size_t Dim>
std::string trajectory_header() {
  std::string h = "t";
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t d = 0; d < Dim; ++d) {
      h += ",j" + std::to_string(j) + (Dim == 2 ? kAxes2D[d] : kAxes3D[d]);
    }
  }
  return h;
}

inline std::string format_coordinate(double v) {
  // Shortest representation that round-trips exactly.
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(v);
}

}  // namespace detail

template <std::size_t Dim>
std::string write_trajectory_csv(const Trajectory<Dim>& traj) {
  std::string out = detail::trajectory_header<Dim>() + "\n";
  for (const auto& s : traj.samples) {
    out += std::to_string(s.t);
    for (const auto& joint : s.keypoints.joints) {
      for (double c : joint) {
        out += ',';
        out += detail::format_coordinate(c);
      }
    }
    out += '\n';
  }
  return out;
}

/// Returns the dimensionality declared by a trajectory csv header (2 or 3).
inline std::size_t trajectory_dimension(std::string_view text) {
  const auto nl = text.find('\n');
  std::string_view header = text.substr(0, nl);
  while (!header.empty() && header.back() == '\r') header.remove_suffix(1);
  if (header == detail::trajectory_header<2>()) return 2;
  if (header == detail::trajectory_header<3>()) return 3;
  throw std::invalid_argument("trajectory csv: unrecognized header");
}

template <std::size_t Dim>
Trajectory<Dim> read_trajectory_csv(std::string_view text) {
  if (trajectory_dimension(text) != Dim) {
    throw std::invalid_argument("trajectory csv: expected " + std::to_string(Dim) + "D header");
  }
  Trajectory<Dim> traj;
  std::size_t line_no = 1;
  text.remove_prefix(std::min(text.size(), text.find('\n') + 1));
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fail = [&](const std::string& why) {
      return std::invalid_argument("trajectory csv line " + std::to_string(line_no) + ": " + why);
    };
    const auto next_field = [&]() {
      if (line.empty()) throw fail("too few fields");
      const auto comma = line.find(',');
      const auto f = line.substr(0, comma);
      line = comma == std::string_view::npos ? std::string_view{} : line.substr(comma + 1);
      return f;
    };

    typename Trajectory<Dim>::Sample sample{};
    const auto tf = next_field();
    if (std::from_chars(tf.data(), tf.data() + tf.size(), sample.t).ptr != tf.data() + tf.size() ||
        tf.empty()) {
      throw fail("malformed timestamp");
    }
    for (auto& joint : sample.keypoints.joints) {
      for (auto& c : joint) {
        const auto f = next_field();
        const std::string s(f);
        std::size_t used = 0;
        try {
          c = std::stod(s, &used);
        } catch (const std::exception&) {
          throw fail("malformed coordinate '" + s + "'");
        }
        if (used != s.size()) throw fail("malformed coordinate '" + s + "'");
      }
    }
    if (!line.empty()) throw fail("too many fields");
    if (!traj.samples.empty() && sample.t <= traj.samples.back().t) {
      throw fail("timestamps must be strictly increasing");
    }
    traj.samples.push_back(sample);
  }
  return traj;
}

}  // namespace evframe
