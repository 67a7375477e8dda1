// Simulates a moving disc, compares count and time segmentation at two speeds,
// then renders and denoises one LNECS frame.
#include <cstdio>

#include "evframe/evframe.hpp"

using namespace evframe;

namespace {

SceneConfig disc_scene(Duration duration) {
  SceneConfig cfg;
  cfg.duration = duration;
  cfg.noise.rate = 0.5;
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

void describe(const char* label, const std::vector<Segment>& segs) {
  std::size_t events = 0;
  for (const auto& s : segs) events += s.size();
  std::printf("  %-10s %4zu segments, %8.1f events/segment\n", label, segs.size(),
              segs.empty() ? 0.0 : static_cast<double>(events) / segs.size());
}

}  // namespace

int main() {
  for (Duration d : {800'000ull, 200'000ull}) {
    const auto r = simulate(disc_scene(d));
    std::printf("sweep in %llu ms: %zu events\n", static_cast<unsigned long long>(d / 1000), r.events.size());
    describe("count:2000", segment_by_count(r.events, 2000, TailPolicy::Drop));
    describe("time:20", segment_by_time(r.events, 20'000, TailPolicy::Drop));
  }

  const auto r = simulate(disc_scene(400'000));
  const auto seg = window_before(r.events, 200'000, 3000);
  const auto map = BinningMap::identity(r.events.geometry());
  const auto frame = lnecs(seg, map);
  const auto ec = event_count(seg, map);
  const auto clean = suppress_noise(frame, ec, 3, 0.5);
  const auto active = [](const Frame& f) {
    std::size_t n = 0;
    for (std::uint32_t y = 0; y < f.geometry.height; ++y) {
      for (std::uint32_t x = 0; x < f.geometry.width; ++x) n += (f.at(2, x, y) > 0 || f.at(3, x, y) > 0) ? 1 : 0;
    }
    return n;
  };
  const auto center = r.trajectory.at(200'000.0).joints[0];
  std::printf("window of %zu events ending at 200 ms, disc at (%.1f, %.1f)\n", seg.size(), center[0], center[1]);
  std::printf("  active pixels before/after denoise: %zu / %zu\n", active(frame), active(clean));
  return 0;
}
