#pragma once

// Palm-normalized keypoint accuracy (PCKp / AUCp), the camera transform for teacher labels and
// the distillation loss value.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evframe/augment.hpp"
#include "evframe/keypoints.hpp"

namespace evframe {

/// Wrist-to-middle-MCP distance in the set's native units.
template <std::size_t Dim>
double palm_length(const KeypointSet<Dim>& gt) {
  const double d = distance(gt.joints[kWrist], gt.joints[kMiddleMcp]);
  if (!(d > 0.0)) throw std::domain_error("palm length is zero: wrist and middle MCP coincide");
  return d;
}

/// Fraction of errors <= radius (inclusive).
inline double fraction_within(std::span<const double> errors, double radius) {
  if (errors.empty()) throw std::invalid_argument("fraction_within: no errors");
  std::size_t hits = 0;
  for (double e : errors) hits += e <= radius ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

/// Per-joint error divided by the ground-truth palm length.
template <std::size_t Dim>
std::array<double, kJointCount> normalized_errors(const KeypointSet<Dim>& pred,
                                                  const KeypointSet<Dim>& gt) {
  const double palm = palm_length(gt);
  std::array<double, kJointCount> out{};
  for (std::size_t j = 0; j < kJointCount; ++j) {
    out[j] = distance(pred.joints[j], gt.joints[j]) / palm;
  }
  return out;
}

template <std::size_t Dim>
double pckp(const KeypointSet<Dim>& pred, const KeypointSet<Dim>& gt, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("pckp: tau must be >= 0");
  const double palm = palm_length(gt);
  std::array<double, kJointCount> errors{};
  for (std::size_t j = 0; j < kJointCount; ++j) errors[j] = distance(pred.joints[j], gt.joints[j]);
  return fraction_within(errors, tau * palm);
}

/// Ascending thresholds start, start + step, ..., stop (in palm lengths).
struct Sweep {
  double start = 0.0;
  double stop = 1.0;
  double step = 0.01;

  std::vector<double> thresholds() const {
    if (!(step > 0.0) || !(stop >= start) || start < 0.0 || stop > 1.0) {
      throw std::invalid_argument("sweep must be ascending within [0, 1] with step > 0");
    }
    const auto n = static_cast<std::size_t>(std::llround((stop - start) / step));
    std::vector<double> out(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      out[i] = n == 0 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(n);
    }
    return out;
  }

  std::string to_string() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%g:%g:%g", start, step, stop);
    return buf;
  }
};

/// Parses "start:step:stop".
inline Sweep parse_sweep(const std::string& text) {
  Sweep s;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &s.start, &s.step, &s.stop, &tail) != 3) {
    throw std::invalid_argument("sweep must look like start:step:stop, got '" + text + "'");
  }
  (void)s.thresholds();
  return s;
}

struct PckCurve {
  std::vector<double> thresholds;
  std::vector<double> values;

  /// Trapezoid area divided by the threshold span; a single-point curve returns its value.
  double area() const {
    if (thresholds.size() != values.size() || thresholds.empty()) {
      throw std::invalid_argument("PckCurve: malformed curve");
    }
    if (thresholds.size() == 1) return values.front();
    double a = 0.0;
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
      a += 0.5 * (values[i] + values[i - 1]) * (thresholds[i] - thresholds[i - 1]);
    }
    return a / (thresholds.back() - thresholds.front());
  }
};

/// Per-frame PCK (normalized errors against each threshold), averaged over frames.
inline PckCurve pck_curve(std::span<const std::vector<double>> normalized_errors_per_frame,
                          std::span<const double> thresholds) {
  if (normalized_errors_per_frame.empty()) throw std::invalid_argument("pck_curve: no frames");
  PckCurve curve{{thresholds.begin(), thresholds.end()}, std::vector<double>(thresholds.size(), 0.0)};
  for (const auto& frame : normalized_errors_per_frame) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      curve.values[i] += fraction_within(frame, thresholds[i]);
    }
  }
  for (auto& v : curve.values) v /= static_cast<double>(normalized_errors_per_frame.size());
  return curve;
}

template <std::size_t Dim>
PckCurve pck_curve(std::span<const KeypointSet<Dim>> preds, std::span<const KeypointSet<Dim>> gts,
                   const Sweep& sweep) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("pck_curve: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(gts.size()) + " ground truths");
  }
  if (preds.empty()) throw std::invalid_argument("pck_curve: empty sequences");
  std::vector<std::vector<double>> errors;
  errors.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto e = normalized_errors(preds[i], gts[i]);
    errors.emplace_back(e.begin(), e.end());
  }
  const auto t = sweep.thresholds();
  return pck_curve(errors, t);
}

template <std::size_t Dim>
double aucp(std::span<const KeypointSet<Dim>> preds, std::span<const KeypointSet<Dim>> gts,
            const Sweep& sweep = {}) {
  return pck_curve(preds, gts, sweep).area();
}

// ---------------------------------------------------------------------------------------------

using Matrix3 = std::array<std::array<double, 3>, 3>;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Rigid extrinsics (meters) plus pinhole intrinsics (pixels).
struct CameraTransform {
  Matrix3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<double, 3> translation{0, 0, 0};
  Intrinsics intrinsics;

  void validate(double tolerance = 1e-9) const {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < 3; ++k) dot += rotation[i][k] * rotation[j][k];
        if (std::abs(dot - (i == j ? 1.0 : 0.0)) > tolerance) {
          throw std::invalid_argument("camera rotation is not orthonormal");
        }
      }
    }
    const auto& r = rotation;
    const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    if (std::abs(det - 1.0) > tolerance) {
      throw std::invalid_argument("camera rotation has determinant != +1");
    }
  }
};

struct CameraPoints {
  Keypoints3D camera;  // event-camera frame, meters
  Keypoints2D image;   // pinhole projection, pixels
};

inline CameraPoints apply_camera(const Keypoints3D& points, const CameraTransform& cam) {
  cam.validate();
  CameraPoints out;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto& p = points.joints[j];
    auto& q = out.camera.joints[j];
    for (std::size_t i = 0; i < 3; ++i) {
      q[i] = cam.rotation[i][0] * p[0] + cam.rotation[i][1] * p[1] + cam.rotation[i][2] * p[2] +
             cam.translation[i];
    }
    if (!(q[2] > 0.0)) {
      throw std::domain_error("joint " + std::to_string(j) + " has non-positive depth " +
                              std::to_string(q[2]) + " after camera transform");
    }
    const auto& k = cam.intrinsics;
    out.image.joints[j] = {k.fx * q[0] / q[2] + k.cx, k.fy * q[1] / q[2] + k.cy};
  }
  return out;
}

/// Mean per-joint Euclidean distance.
template <std::size_t Dim>
double mean_joint_distance(const KeypointSet<Dim>& a, const KeypointSet<Dim>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) s += distance(a.joints[j], b.joints[j]);
  return s / static_cast<double>(kJointCount);
}

/// Student 2D output against the teacher's 3D joints moved into the event camera, projected and
/// passed through the same view augmentation as the student's input.
inline double distill_loss(const Keypoints2D& student, const Keypoints3D& teacher3d,
                           const CameraTransform& cam, const AugmentSpec& label_transform) {
  validate(label_transform);
  const auto target = transform_keypoints(apply_camera(teacher3d, cam).image, label_transform);
  return mean_joint_distance(student, target);
}

/// 3D form: compares in event-camera space. Only the identity view transform has a 3D meaning.
inline double distill_loss(const Keypoints3D& student, const Keypoints3D& teacher3d,
                           const CameraTransform& cam, const AugmentSpec& label_transform) {
  validate(label_transform);
  if (label_transform.quarter_turns != 0 || label_transform.angle_deg != 0.0 ||
      (label_transform.crop && (label_transform.crop->x0 != 0 || label_transform.crop->y0 != 0))) {
    throw std::invalid_argument("3D distillation loss requires an identity view transform");
  }
  return mean_joint_distance(student, apply_camera(teacher3d, cam).camera);
}

// ---------------------------------------------------------------------------------------------

/// Plain-text evaluation report.
inline std::string eval_report(const PckCurve& curve, const Sweep& sweep, std::size_t frames,
                               std::size_t dims) {
  std::string out;
  char buf[128];
  out += "# evframe eval report\n";
  out += "pooling: per-frame PCKp, averaged over frames\n";
  out += "correct: error <= threshold * palm length (wrist to middle MCP)\n";
  out += "sweep: " + sweep.to_string() + "\n";
  out += "dims: " + std::to_string(dims) + "\n";
  out += "frames: " + std::to_string(frames) + "\n";
  out += "threshold,pckp\n";
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f,%.6f\n", curve.thresholds[i], curve.values[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "aucp: %.6f\n", curve.area());
  out += buf;
  return out;
}

}  // namespace evframe
