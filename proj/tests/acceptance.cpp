// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "evframe/evframe.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace evframe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------------------------

Outcome oracle_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  bool counts_exact = true;
  std::size_t total_events = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SensorGeometry in{8 + static_cast<std::uint32_t>(rng() % 1273), 8 + static_cast<std::uint32_t>(rng() % 793)};
    const SensorGeometry out{1 + static_cast<std::uint32_t>(rng() % std::min(in.width, 320u)),
                             1 + static_cast<std::uint32_t>(rng() % std::min(in.height, 200u))};
    const std::size_t n = trial == 0 ? 100'000 : rng() % 100'001;
    const auto s = testing::random_stream(rng, in, n, 1 + rng() % 2'000'000);
    const auto seg = testing::whole(s);
    total_events += n;
    const BinningMap map(in, out);
    const auto ref = testing::reference(seg.events, in, out);
    const auto ec = event_count(seg, map);
    const auto es = lnes(seg, map);
    const auto ecn = lnec(ec);
    const auto cat = lnecs(seg, map);
    const auto prod = lnewcs(seg, map);
    double ec_sum = 0.0;
    for (float v : ec.data) ec_sum += v;
    counts_exact = counts_exact && ec_sum == static_cast<double>(n);
    for (int p = 0; p < 2; ++p) {
      for (std::uint32_t y = 0; y < out.height; ++y) {
        for (std::uint32_t x = 0; x < out.width; ++x) {
          counts_exact = counts_exact && ec.at(p, x, y) == ref.ec(x, y, p);
          const double l = ref.lnes(x, y, p);
          const double c = ref.lnec(x, y, p);
          worst = std::max({worst, std::abs(es.at(p, x, y) - l), std::abs(ecn.at(p, x, y) - c),
                            std::abs(cat.at(p, x, y) - l), std::abs(cat.at(2 + p, x, y) - c),
                            std::abs(prod.at(p, x, y) - l * c)});
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-6 && counts_exact && elapsed < 60.0,
          fmt("100 segments, %zu events, max |err| %.2e, EC exact %s, %.1f s", total_events, worst,
              counts_exact ? "yes" : "no", elapsed)};
}

// ---------------------------------------------------------------------------------------------

SceneConfig disc_scene(Duration duration, double noise_rate = 0.0) {
  SceneConfig cfg;
  cfg.geometry = {240, 150};
  cfg.duration = duration;
  cfg.noise.rate = noise_rate;
  cfg.seed = 17;
  Shape disc;
  disc.kind = Shape::Kind::Disc;
  disc.size = 8;
  disc.contrast = 3.0;
  disc.path.kind = Path::Kind::Linear;
  disc.path.from = {30, 75};
  disc.path.to = {210, 75};
  cfg.shapes.push_back(disc);
  return cfg;
}

std::array<double, 2> active_centroid(const Segment& seg) {
  std::set<std::uint32_t> active;
  for (const auto& e : seg.events) active.insert(std::uint32_t{e.y} * seg.geometry.width + e.x);
  double cx = 0;
  double cy = 0;
  for (auto k : active) {
    cx += k % seg.geometry.width;
    cy += k / seg.geometry.width;
  }
  return {cx / active.size(), cy / active.size()};
}

double mean_displacement(const std::vector<Segment>& segs) {
  std::vector<std::array<double, 2>> c;
  for (const auto& s : segs) {
    if (!s.empty()) c.push_back(active_centroid(s));
  }
  if (c.size() < 2) throw std::runtime_error("too few non-empty segments");
  double d = 0;
  for (std::size_t i = 1; i < c.size(); ++i) d += std::hypot(c[i][0] - c[i - 1][0], c[i][1] - c[i - 1][1]);
  return d / static_cast<double>(c.size() - 1);
}

Outcome speed_adaptivity() {
  const auto t0 = Clock::now();
  const auto slow = simulate(disc_scene(800'000)).events;
  const auto fast = simulate(disc_scene(200'000)).events;
  const double count_slow = mean_displacement(segment_by_count(slow, 1500, TailPolicy::Drop));
  const double count_fast = mean_displacement(segment_by_count(fast, 1500, TailPolicy::Drop));
  const double time_slow = mean_displacement(segment_by_time(slow, 10'000, TailPolicy::Drop));
  const double time_fast = mean_displacement(segment_by_time(fast, 10'000, TailPolicy::Drop));
  const double count_diff = std::abs(count_fast - count_slow) / count_slow;
  const double time_ratio = time_fast / time_slow;
  const double elapsed = seconds_since(t0);
  return {count_diff < 0.15 && time_ratio >= 3.0 && time_ratio <= 5.0 && elapsed < 30.0,
          fmt("count:1500 %.2f vs %.2f px (diff %.1f%%), time:10 ratio %.2f, %.1f s", count_slow, count_fast,
              100.0 * count_diff, time_ratio, elapsed)};
}

// ---------------------------------------------------------------------------------------------

std::vector<std::uint8_t> footprint(const Frame& f) {
  std::vector<std::uint8_t> out(f.plane_size(), 0);
  for (std::size_t c = 0; c < f.channel_count(); ++c) {
    const auto plane = f.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i) out[i] |= plane[i] > 0.0f ? 1 : 0;
  }
  return out;
}

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Outcome slow_fast_equivalence() {
  const auto t0 = Clock::now();
  const auto slow = simulate(disc_scene(900'000)).events;
  const auto fast = simulate(disc_scene(300'000)).events;
  const auto map = BinningMap::identity(slow.geometry());
  const Duration window = 6'000;
  double worst = 1.0;
  double sum = 0.0;
  int n = 0;
  for (Timestamp anchor_fast = 60'000; anchor_fast <= 240'000; anchor_fast += 30'000) {
    const Timestamp anchor_slow = 3 * anchor_fast;
    const auto base = slice_time(slow, anchor_slow + 1 - window, anchor_slow + 1);
    const auto stretched = variable_length_segment(slow, anchor_slow, base.size(), 3.0);
    const auto target = slice_time(fast, anchor_fast + 1 - window, anchor_fast + 1);
    const double v = iou(footprint(lnecs(stretched, map)), footprint(lnecs(target, map)));
    worst = std::min(worst, v);
    sum += v;
    ++n;
  }
  const double elapsed = seconds_since(t0);
  return {worst > 0.7 && elapsed < 30.0,
          fmt("%d anchors, IoU min %.3f mean %.3f, %.1f s", n, worst, sum / n, elapsed)};
}

// ---------------------------------------------------------------------------------------------

Outcome noise_checks() {
  const auto t0 = Clock::now();
  // Linear scaling of injected noise with duration.
  const EventStream empty({}, {240, 150});
  const double rate = 2.0;
  const std::vector<double> durations_s{0.05, 0.1, 0.15, 0.2, 0.25};
  std::vector<double> means;
  for (double d : durations_s) {
    double total = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      total += static_cast<double>(
          add_noise(empty, rate, static_cast<Duration>(d * 1e6), 1000 * trial + static_cast<std::uint64_t>(d * 1e3))
              .size());
    }
    means.push_back(total / 20.0);
  }
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    mx += durations_s[i];
    my += means[i];
  }
  mx /= means.size();
  my /= means.size();
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    sxy += (durations_s[i] - mx) * (means[i] - my);
    sxx += (durations_s[i] - mx) * (durations_s[i] - mx);
  }
  const double slope = sxy / sxx;
  const double expected = rate * 240 * 150;
  const double slope_err = std::abs(slope - expected) / expected;

  // Disc plus noise: pick epsilon over a grid at sigma 3.
  auto cfg = disc_scene(400'000);
  const auto clean = simulate(cfg).events;
  const auto noisy = add_noise(clean, 1.0, cfg.duration, 99);
  const auto map = BinningMap::identity(clean.geometry());
  const auto clean_ec = event_count(slice_time(clean, 150'000, 180'000), map);
  const auto noisy_ec = event_count(slice_time(noisy, 150'000, 180'000), map);
  double best_removed = 0;
  double best_retained = 0;
  double best_eps = -1;
  for (int i = 0; i <= 40; ++i) {
    const double eps = 0.05 * i;
    const auto mask = noise_mask(noisy_ec, 3, eps);
    std::size_t noise_px = 0;
    std::size_t noise_removed = 0;
    double signal_mass = 0;
    double signal_kept = 0;
    for (int p = 0; p < 2; ++p) {
      const auto pol = p == 0 ? Polarity::Pos : Polarity::Neg;
      for (std::uint32_t y = 0; y < 150; ++y) {
        for (std::uint32_t x = 0; x < 240; ++x) {
          const float v = noisy_ec.at(p, x, y);
          if (v == 0.0f) continue;
          const bool kept = mask.kept(pol, x, y);
          if (clean_ec.at(p, x, y) == 0.0f) {
            ++noise_px;
            noise_removed += kept ? 0 : 1;
          } else {
            signal_mass += v;
            signal_kept += kept ? v : 0.0;
          }
        }
      }
    }
    const double removed = static_cast<double>(noise_removed) / noise_px;
    const double retained = signal_kept / signal_mass;
    if (removed >= 0.8 && retained >= 0.95 && best_eps < 0) {
      best_removed = removed;
      best_retained = retained;
      best_eps = eps;
    }
  }

  // Idempotence and epsilon-monotonicity on the noisy LNECS frame.
  const auto seg = slice_time(noisy, 150'000, 180'000);
  const auto frame = lnecs(seg, map);
  bool idempotent = true;
  bool monotone = true;
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (int i = 0; i <= 20; ++i) {
    const double eps = 0.1 * i;
    const auto once = suppress_noise(frame, noisy_ec, 3, eps);
    idempotent = idempotent && suppress_noise(once, noisy_ec, 3, eps) == once;
    const auto kept = noise_mask(noisy_ec, 3, eps).kept_count();
    monotone = monotone && kept <= previous;
    previous = kept;
  }
  const double elapsed = seconds_since(t0);
  return {slope_err < 0.05 && best_eps >= 0 && idempotent && monotone,
          fmt("slope %.0f vs %.0f ev/s (%.2f%%); eps %.2f removes %.1f%% noise px keeps %.1f%% signal; "
              "idempotent %s monotone %s; %.1f s",
              slope, expected, 100 * slope_err, best_eps, 100 * best_removed, 100 * best_retained,
              idempotent ? "yes" : "no", monotone ? "yes" : "no", elapsed)};
}

// ---------------------------------------------------------------------------------------------

Outcome geometric_consistency() {
  std::mt19937_64 rng(404);
  const SensorGeometry sensor{128, 96};
  const auto s = testing::random_stream(rng, sensor, 20'000);
  const std::array reps{Representation::Ec, Representation::Lnes, Representation::Lnec, Representation::Lnecs,
                        Representation::Lnewcs};
  int checks = 0;
  bool frames_ok = true;
  bool points_ok = true;

  for (const auto out : {sensor, SensorGeometry{64, 48}}) {
    for (int k = 0; k < 4; ++k) {
      const auto rotated = rotate_events(s, k);
      const BinningMap map(sensor, out);
      const BinningMap rmap(rotated.geometry(), rotated_size(out, k));
      for (auto rep : reps) {
        const auto a = render(testing::whole(rotated), rmap, rep);
        const auto b = rotate_quarter_turns(render(testing::whole(s), map, rep), k);
        frames_ok = frames_ok && a == b;
        ++checks;
      }
    }
  }
  for (int k = 0; k < 4; ++k) {
    AugmentSpec spec;
    spec.input_size = sensor;
    spec.quarter_turns = k;
    const auto rotated = rotate_events(s, k);
    for (std::size_t i = 0; i < s.size(); i += 97) {
      const auto p = transform_point({double(s[i].x), double(s[i].y)}, spec);
      points_ok = points_ok && p[0] == rotated[i].x && p[1] == rotated[i].y;
    }
  }

  const auto map = BinningMap::identity(sensor);
  const auto ec = event_count(testing::whole(s), map);
  for (int trial = 0; trial < 20; ++trial) {
    CropRect r;
    r.width = 1 + static_cast<std::uint32_t>(rng() % sensor.width);
    r.height = 1 + static_cast<std::uint32_t>(rng() % sensor.height);
    r.x0 = static_cast<std::uint32_t>(rng() % (sensor.width - r.width + 1));
    r.y0 = static_cast<std::uint32_t>(rng() % (sensor.height - r.height + 1));
    const auto cropped = crop_events(s, r);
    frames_ok = frames_ok && event_count(testing::whole(cropped), BinningMap::identity(cropped.geometry())) ==
                                 crop_frame(ec, r);
    ++checks;
    AugmentSpec spec;
    spec.input_size = sensor;
    spec.crop = r;
    std::size_t j = 0;
    for (const auto& e : s.events()) {
      if (e.x < r.x0 || e.x >= r.x0 + r.width || e.y < r.y0 || e.y >= r.y0 + r.height) continue;
      const auto p = transform_point({double(e.x), double(e.y)}, spec);
      points_ok = points_ok && p[0] == cropped[j].x && p[1] == cropped[j].y;
      ++j;
    }
  }
  return {frames_ok && points_ok,
          fmt("%d frame comparisons (4 rotations x 5 reps x 2 binnings, 20 EC crops); frames %s, keypoints %s",
              checks, frames_ok ? "bit-exact" : "MISMATCH", points_ok ? "exact" : "MISMATCH")};
}

// ---------------------------------------------------------------------------------------------

Outcome metrics_suite() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 0.08);
  std::vector<Keypoints3D> gts(50);
  std::vector<Keypoints3D> preds(50);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      for (int d = 0; d < 3; ++d) {
        gts[i].joints[j][d] = n(rng);
        preds[i].joints[j][d] = gts[i].joints[j][d] + 0.25 * n(rng);
      }
    }
  }
  const double perfect = aucp<3>(gts, gts);

  Keypoints2D gt;
  gt.joints[kMiddleMcp] = {0, 10};
  auto pred = gt;
  pred.joints[5][0] += 5.0;
  const std::vector<std::vector<double>> one{{0.5}};
  const auto t = Sweep{}.thresholds();
  const double step_curve = pck_curve(one, t).area();

  bool monotone = true;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double prev = 0;
    for (double tau : t) {
      const double v = pckp(preds[i], gts[i], tau);
      monotone = monotone && v >= prev;
      prev = v;
    }
  }

  const double base = aucp<3>(preds, gts);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // Random rotation from a normalized quaternion.
    std::normal_distribution<double> q(0.0, 1.0);
    double a = q(rng), b = q(rng), c = q(rng), d = q(rng);
    const double norm = std::sqrt(a * a + b * b + c * c + d * d);
    a /= norm, b /= norm, c /= norm, d /= norm;
    const Matrix3 r{{{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                     {2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)},
                     {2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d}}};
    const auto rot = [&r](Keypoints3D kp) {
      for (auto& j : kp.joints) {
        const auto v = j;
        for (int i = 0; i < 3; ++i) j[i] = r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2];
      }
      return kp;
    };
    std::vector<Keypoints3D> rp;
    std::vector<Keypoints3D> rg;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      rp.push_back(rot(preds[i]));
      rg.push_back(rot(gts[i]));
    }
    worst = std::max(worst, std::abs(aucp<3>(rp, rg) - base));
  }
  return {perfect == 1.0 && std::abs(step_curve - 0.505) <= 1e-6 && monotone && worst < 1e-9,
          fmt("perfect %.6f, half-palm step %.6f, monotone %s, rotation |dAUCp| %.1e (base %.4f)", perfect,
              step_curve, monotone ? "yes" : "no", worst, base)};
}

// ---------------------------------------------------------------------------------------------

template <typename F>
double best_rate(std::size_t events, int repeats, F&& f) {
  double best = 0;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    f();
    best = std::max(best, static_cast<double>(events) / seconds_since(t0));
  }
  return best;
}

Outcome throughput() {
  std::mt19937_64 rng(5);
  const std::size_t n = 10'000'000;
  const auto s = testing::random_stream(rng, {1280, 800}, n, 10'000'000);
  const BinningMap map({1280, 800}, {240, 150});
  volatile float sink = 0;
  const double ec_rate = best_rate(n, 3, [&] { sink = event_count(testing::whole(s), map).data[0]; });
  volatile std::size_t count = 0;
  const double seg_rate = best_rate(n, 3, [&] { count = segment_by_count(s, 10'000, TailPolicy::Drop).size(); });
  (void)sink;
  (void)count;
  return {ec_rate >= 5e6 && seg_rate >= 50e6,
          fmt("EC 1280x800 -> 240x150: %.1f M ev/s; count:10000 segmentation: %.0f M ev/s (single thread)",
              ec_rate / 1e6, seg_rate / 1e6)};
}

// ---------------------------------------------------------------------------------------------

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::recursive_directory_iterator(b)) ++count_b;
  std::size_t count_a = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    ++count_a;
    if (!e.is_regular_file()) continue;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || read_file(e.path()) != read_file(other)) return false;
    ++files;
  }
  return count_a == count_b;
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "evframe_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  write_file(root / "scene.json", R"({
    "width": 240, "height": 150, "duration_us": 400000, "noise_rate": 0.5, "seed": 3,
    "shapes": [
      {"kind": "disc", "size": 8, "contrast": 3, "path": {"kind": "linear", "from": [30, 75], "to": [210, 75]}},
      {"kind": "bar", "size": 2, "length": 30, "angular_velocity_deg_s": 180,
       "path": {"kind": "circle", "center": [120, 75], "radius": 30}},
      {"kind": "chain", "size": 2, "segment_lengths": [15, 12], "joint_angles_deg": [-80, 30],
       "joint_amplitudes_deg": [10, 20], "joint_frequency_hz": 4,
       "path": {"kind": "sine", "center": [120, 60], "amplitude": [20, 10], "frequency_hz": 2},
       "slots": [4, 9, 12]}
    ]})");
  const auto pipeline = [&](const std::string& tag, int threads) {
    const auto d = root / tag;
    fs::create_directories(d);
    // Relative paths, so manifests from different run directories are comparable.
    const std::string cli = "cd " + d.string() + " && " + std::string(EVFRAME_CLI) +
                            " --quiet --seed 11 --threads " + std::to_string(threads);
    const std::vector<std::string> steps{
        " simulate --config ../scene.json --out s.evb --traj t.csv",
        " segment --in s.evb --segment pixels:300 --max-events 4000 --out index.csv",
        " render --in s.evb --segment count:4000 --rep lnecs --preview --traj t.csv --out frames",
        " render --in s.evb --segment count:4000 --rep ec --out ec",
        " denoise --in frames/seg_000001.evf --ec ec/seg_000001.evf --sigma 3 --eps 0.5 --out denoised.evf",
        " augment --in s.evb --traj t.csv --segment count:4000 --samples 3 --angle -10:10 --crop 0.6:1"
        " --length 0.5:3 --out aug",
        " eval --pred t.csv --gt t.csv --out report.txt",
        " stats --in s.evb > stats.txt",
    };
    for (const auto& step : steps) {
      if (std::system((cli + step).c_str()) != 0) throw std::runtime_error("CLI step failed:" + step);
    }
  };
  pipeline("run1", 1);
  pipeline("run2", 1);
  pipeline("run3", 4);
  std::size_t files12 = 0;
  std::size_t files13 = 0;
  const bool same12 = same_tree(root / "run1", root / "run2", files12);
  const bool same13 = same_tree(root / "run1", root / "run3", files13);
  fs::remove_all(root);
  return {same12 && same13 && files12 > 0,
          fmt("8-step pipeline x3 (threads 1, 1, 4): %zu files, identical %s/%s", files12, same12 ? "yes" : "no",
              same13 ? "yes" : "no")};
}

}  // namespace

int main() {
  std::printf("evframe acceptance suite\n");
  report("representation-oracle", oracle_suite);
  report("speed-adaptivity", speed_adaptivity);
  report("slow-fast-equivalence", slow_fast_equivalence);
  report("noise-model-and-suppression", noise_checks);
  report("geometric-label-consistency", geometric_consistency);
  report("metrics", metrics_suite);
  report("throughput", throughput);
  report("cli-determinism", cli_determinism);
  std::printf("%s: %d failing criteria\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
