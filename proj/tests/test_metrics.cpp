#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "evframe/metrics.hpp"

namespace evframe {
namespace {

template <std::size_t Dim>
KeypointSet<Dim> random_hand(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  KeypointSet<Dim> kp;
  for (auto& j : kp.joints) {
    for (auto& c : j) c = n(rng);
  }
  return kp;
}

template <std::size_t Dim>
KeypointSet<Dim> jitter(std::mt19937_64& rng, KeypointSet<Dim> kp, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& j : kp.joints) {
    for (auto& c : j) c += n(rng);
  }
  return kp;
}

Matrix3 rotation(double ax, double ay, double az) {
  const auto rx = Matrix3{{{1, 0, 0}, {0, std::cos(ax), -std::sin(ax)}, {0, std::sin(ax), std::cos(ax)}}};
  const auto ry = Matrix3{{{std::cos(ay), 0, std::sin(ay)}, {0, 1, 0}, {-std::sin(ay), 0, std::cos(ay)}}};
  const auto rz = Matrix3{{{std::cos(az), -std::sin(az), 0}, {std::sin(az), std::cos(az), 0}, {0, 0, 1}}};
  const auto mul = [](const Matrix3& a, const Matrix3& b) {
    Matrix3 c{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
  };
  return mul(rz, mul(ry, rx));
}

Keypoints3D rotate(const Keypoints3D& kp, const Matrix3& r) {
  Keypoints3D out;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (int i = 0; i < 3; ++i) {
      out.joints[j][i] = r[i][0] * kp.joints[j][0] + r[i][1] * kp.joints[j][1] + r[i][2] * kp.joints[j][2];
    }
  }
  return out;
}

TEST(PalmLength, Examples) {
  Keypoints3D a;
  a.joints[kMiddleMcp] = {0, 0.1, 0};
  EXPECT_DOUBLE_EQ(palm_length(a), 0.1);
  Keypoints2D b;
  b.joints[kWrist] = {3, 4};
  EXPECT_DOUBLE_EQ(palm_length(b), 5.0);
  EXPECT_THROW((void)palm_length(Keypoints2D{}), std::domain_error);
}

TEST(Pckp, Examples) {
  std::mt19937_64 rng(1);
  const auto gt = random_hand<2>(rng, 20.0);
  for (double tau : {0.0, 0.1, 1.0}) EXPECT_EQ(pckp(gt, gt, tau), 1.0);

  // Palm length 10, per-joint errors 3 and 20, threshold 0.5 palm.
  const std::vector<double> errors{3.0, 20.0};
  EXPECT_EQ(fraction_within(errors, 0.5 * 10.0), 0.5);

  auto pred = gt;
  pred.joints[4][0] += 1e-3;
  EXPECT_DOUBLE_EQ(pckp(pred, gt, 0.0), 20.0 / 21.0);
  EXPECT_THROW((void)pckp(pred, gt, -0.1), std::invalid_argument);
}

TEST(Pckp, InclusiveAtThreshold) {
  Keypoints2D gt;
  gt.joints[kMiddleMcp] = {0, 4};  // palm 4
  auto pred = gt;
  for (auto& j : pred.joints) j[0] += 1.0;  // every error exactly 0.25 palm
  EXPECT_EQ(pckp(pred, gt, 0.25), 1.0);
  EXPECT_EQ(pckp(pred, gt, 0.2499), 0.0);
}

TEST(Pckp, MonotoneAndScaleInvariant) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = random_hand<3>(rng, 0.1);
    const auto pred = jitter(rng, gt, 0.03);
    double prev = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double v = pckp(pred, gt, i / 100.0);
      EXPECT_GE(v, prev);
      prev = v;
    }
    const double s = 0.25 + (rng() % 1000) / 100.0;
    auto spred = pred;
    auto sgt = gt;
    for (auto* kp : {&spred, &sgt}) {
      for (auto& j : kp->joints) {
        for (auto& c : j) c *= s;
      }
    }
    const auto a = normalized_errors(pred, gt);
    const auto b = normalized_errors(spred, sgt);
    for (std::size_t j = 0; j < kJointCount; ++j) ASSERT_NEAR(a[j], b[j], 1e-12);
    EXPECT_EQ(pckp(pred, gt, 0.3), pckp(spred, sgt, 0.3));
  }
}

TEST(Aucp, PerfectPredictionsScoreOne) {
  std::mt19937_64 rng(3);
  std::vector<Keypoints2D> gts;
  for (int i = 0; i < 10; ++i) gts.push_back(random_hand<2>(rng, 30.0));
  EXPECT_EQ(aucp<2>(gts, gts), 1.0);
  EXPECT_THROW((void)aucp<2>({}, {}), std::invalid_argument);
  EXPECT_THROW((void)aucp<2>(gts, std::span<const Keypoints2D>(gts).first(3)), std::invalid_argument);
}

TEST(Aucp, StepAtHalfPalm) {
  // Normalized error exactly 0.5: the trapezoid over 0:0.01:1 picks up half of the step interval.
  const std::vector<std::vector<double>> errors{{0.5}};
  const auto t = Sweep{0.0, 1.0, 0.01}.thresholds();
  ASSERT_EQ(t.size(), 101u);
  EXPECT_NEAR(pck_curve(errors, t).area(), 0.505, 1e-12);

  Keypoints2D gt;
  gt.joints[kMiddleMcp] = {0, 10};
  auto pred = gt;
  for (auto& j : pred.joints) j[1] += 5.0;
  const std::vector<Keypoints2D> preds{pred};
  const std::vector<Keypoints2D> gts{gt};
  EXPECT_NEAR(aucp<2>(preds, gts, Sweep{0.0, 1.0, 0.01}), 0.505, 1e-12);
}

TEST(Aucp, RigidRotationInvariant) {
  std::mt19937_64 rng(4);
  std::vector<Keypoints3D> preds;
  std::vector<Keypoints3D> gts;
  for (int i = 0; i < 40; ++i) {
    gts.push_back(random_hand<3>(rng, 0.08));
    preds.push_back(jitter(rng, gts.back(), 0.02));
  }
  const double base = aucp<3>(preds, gts);
  EXPECT_GT(base, 0.0);
  EXPECT_LT(base, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = rotation(rng() % 628 / 100.0, rng() % 628 / 100.0, rng() % 628 / 100.0);
    std::vector<Keypoints3D> rp;
    std::vector<Keypoints3D> rg;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      rp.push_back(rotate(preds[i], r));
      rg.push_back(rotate(gts[i], r));
    }
    EXPECT_NEAR(aucp<3>(rp, rg), base, 1e-9);
  }
}

TEST(Sweep, ParseAndValidate) {
  const auto s = parse_sweep("0:0.01:1");
  EXPECT_EQ(s.thresholds().size(), 101u);
  EXPECT_EQ(s.thresholds()[50], 0.5);
  EXPECT_THROW((void)parse_sweep("0:0.01"), std::invalid_argument);
  EXPECT_THROW((void)parse_sweep("1:0.1:0"), std::invalid_argument);
  EXPECT_THROW((void)parse_sweep("0:0:1"), std::invalid_argument);
}

TEST(ApplyCamera, Examples) {
  CameraTransform cam;
  Keypoints3D p;
  p.joints.fill({0, 0, 1});
  EXPECT_EQ(apply_camera(p, cam).image.joints[0], (std::array<double, 2>{0, 0}));

  cam.translation = {0, 0, 1};
  cam.intrinsics = {100, 100, 50, 50};
  p.joints.fill({1, 1, 1});
  const auto out = apply_camera(p, cam);
  EXPECT_EQ(out.image.joints[3], (std::array<double, 2>{100, 100}));
  EXPECT_EQ(out.camera.joints[3], (std::array<double, 3>{1, 1, 2}));

  p.joints[7] = {0, 0, -1};
  EXPECT_THROW((void)apply_camera(p, cam), std::domain_error);
  cam.rotation[0][0] = 2;
  p.joints.fill({0, 0, 1});
  EXPECT_THROW((void)apply_camera(p, cam), std::invalid_argument);
}

TEST(DistillLoss, Examples) {
  std::mt19937_64 rng(6);
  Keypoints3D teacher;
  for (auto& j : teacher.joints) j = {(rng() % 100) / 1000.0, (rng() % 100) / 1000.0, 0.5};
  CameraTransform cam;
  cam.rotation = rotation(0.1, -0.05, 0.2);
  cam.translation = {0.01, -0.02, 0.1};
  cam.intrinsics = {300, 300, 120, 75};
  AugmentSpec spec;
  spec.input_size = {240, 150};
  spec.quarter_turns = 1;
  spec.crop = CropRect{10, 20, 100, 100};

  const auto target = transform_keypoints(apply_camera(teacher, cam).image, spec);
  EXPECT_EQ(distill_loss(target, teacher, cam, spec), 0.0);

  auto shifted = target;
  for (auto& j : shifted.joints) j[0] += 1.0;
  EXPECT_NEAR(distill_loss(shifted, teacher, cam, spec), 1.0, 1e-12);

  // Brute-force mean of norms.
  const auto student = jitter(rng, target, 3.0);
  double sum = 0;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    sum += std::sqrt(std::pow(student.joints[j][0] - target.joints[j][0], 2) +
                     std::pow(student.joints[j][1] - target.joints[j][1], 2));
  }
  EXPECT_NEAR(distill_loss(student, teacher, cam, spec), sum / kJointCount, 1e-9);
  EXPECT_GT(distill_loss(student, teacher, cam, spec), 0.0);
}

TEST(DistillLoss, ThreeDimensionalRequiresIdentityView) {
  Keypoints3D teacher;
  teacher.joints.fill({0, 0, 1});
  CameraTransform cam;
  AugmentSpec spec;
  spec.input_size = {240, 150};
  EXPECT_EQ(distill_loss(teacher, teacher, cam, spec), 0.0);
  spec.quarter_turns = 2;
  EXPECT_THROW((void)distill_loss(teacher, teacher, cam, spec), std::invalid_argument);
}

TEST(EvalReport, ContainsSweepAndArea) {
  const std::vector<std::vector<double>> errors{{0.5}};
  const Sweep sweep;
  const auto t = sweep.thresholds();
  const auto report = eval_report(pck_curve(errors, t), sweep, 1, 2);
  EXPECT_NE(report.find("sweep: 0:0.01:1"), std::string::npos);
  EXPECT_NE(report.find("aucp: 0.505000"), std::string::npos);
  EXPECT_NE(report.find("0.5000,1.000000"), std::string::npos);
}

}  // namespace
}  // namespace evframe
