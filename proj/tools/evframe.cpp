#include <png.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "evframe/evframe.hpp"

namespace fs = std::filesystem;
using namespace evframe;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
};

Globals g_opts;

void note(const std::string& msg) {
  if (!g_opts.quiet) std::cerr << msg << '\n';
}

SensorGeometry parse_size(const std::string& text) {
  unsigned w = 0;
  unsigned h = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%ux%u%c", &w, &h, &tail) != 2 || w == 0 || h == 0) {
    throw std::invalid_argument("size must look like WxH, got '" + text + "'");
  }
  return {w, h};
}

Interval parse_interval(const std::string& text) {
  Interval i;
  char tail = 0;
  const int n = std::sscanf(text.c_str(), "%lf:%lf%c", &i.lo, &i.hi, &tail);
  if (n == 1 && text.find(':') == std::string::npos) {
    i.hi = i.lo;
  } else if (n != 2) {
    throw std::invalid_argument("range must look like LO:HI, got '" + text + "'");
  }
  if (!(i.lo <= i.hi)) throw std::invalid_argument("empty range '" + text + "'");
  return i;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const auto piece = text.substr(pos, comma - pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (piece.empty() || used != piece.size()) {
      throw std::invalid_argument("bad integer list '" + text + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

EventStream load(const fs::path& path, const std::string& geometry) {
  const auto bytes = read_file(path);
  std::optional<SensorGeometry> g;
  if (!geometry.empty()) g = parse_size(geometry);
  return load_stream(bytes, format_for_path(path), g);
}

/// Runs body(i) for i in [0, n) on up to g_opts.threads workers. The first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(g_opts.threads, static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void write_png(const fs::path& path, std::span<const float> plane, SensorGeometry g) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, g.width, g.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(g.width);
  for (std::uint32_t y = 0; y < g.height; ++y) {
    for (std::uint32_t x = 0; x < g.width; ++x) {
      const float v = plane[static_cast<std::size_t>(y) * g.width + x] * 255.0f;
      row[x] = static_cast<png_byte>(std::clamp(v, 0.0f, 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_previews(const fs::path& dir, const std::string& stem, const Frame& f) {
  for (std::size_t c = 0; c < f.channel_count(); ++c) {
    std::string name(channel_name(f.channels[c]));
    std::transform(name.begin(), name.end(), name.begin(), [](char ch) { return static_cast<char>(std::tolower(ch)); });
    name = name.substr(0, name.size() - 1) + (channel_polarity(f.channels[c]) == Polarity::Pos ? "_pos" : "_neg");
    write_png(dir / (stem + "_" + name + ".png"), f.plane(c), f.geometry);
  }
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu", prefix, i);
  return buf;
}

Keypoints2D to_frame_coordinates(const Keypoints2D& kp, const BinningMap& map) {
  Keypoints2D out;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto [u, v] = map.map_point(kp.joints[j][0], kp.joints[j][1]);
    out.joints[j] = {u, v};
  }
  return out;
}

void write_label(const fs::path& path, Timestamp t, const Keypoints2D& kp) {
  Trajectory<2> one;
  one.samples.push_back({t, kp});
  write_file(path, write_trajectory_csv(one));
}

Timestamp label_time(const Segment& seg) { return seg.t_end > seg.t_start ? seg.t_end - 1 : seg.t_start; }

TailPolicy parse_tail(const std::string& s) {
  if (s == "drop") return TailPolicy::Drop;
  if (s == "emit") return TailPolicy::EmitPartial;
  throw std::invalid_argument("tail must be drop or emit");
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, out, traj;
};

void run_simulate(const SimulateArgs& a) {
  const auto bytes = read_file(a.config);
  auto cfg = scene_from_json(json::parse(bytes.begin(), bytes.end()));
  if (g_opts.seed) cfg.seed = *g_opts.seed;
  const auto result = simulate(cfg);
  write_file(a.out, write_stream(result.events, format_for_path(a.out)));
  if (!a.traj.empty()) write_file(a.traj, write_trajectory_csv(result.trajectory));
  note("simulate: " + std::to_string(result.events.size()) + " events, " +
       std::to_string(result.trajectory.samples.size()) + " trajectory samples");
}

struct SegmentArgs {
  std::string in, geometry, segment = "count:10000", tail = "drop", out;
  std::size_t max_events = 0;
};

void run_segment(const SegmentArgs& a) {
  const auto stream = load(a.in, a.geometry);
  const auto segs = segment(stream, parse_segment_spec(a.segment), parse_tail(a.tail), a.max_events);
  std::string text = "id,provenance,first_event,event_count,t_start,t_end,capped\n";
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    text += numbered("seg", i) + "," + to_string(s.provenance) + "," + std::to_string(s.offset) + "," +
            std::to_string(s.size()) + "," + std::to_string(s.t_start) + "," + std::to_string(s.t_end) +
            "," + (s.capped ? "1" : "0") + "\n";
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
  note("segment: " + std::to_string(segs.size()) + " segments");
}

struct RenderArgs {
  std::string in, geometry, segment = "count:10000", tail = "drop", rep = "lnecs", size = "240x150",
                              out, traj;
  std::size_t max_events = 0;
  bool preview = false;
};

void run_render(const RenderArgs& a) {
  const auto stream = load(a.in, a.geometry);
  const auto rep = parse_representation(a.rep);
  const BinningMap map(stream.geometry(), parse_size(a.size));
  const auto segs = segment(stream, parse_segment_spec(a.segment), parse_tail(a.tail), a.max_events);
  std::optional<Trajectory<2>> traj;
  if (!a.traj.empty()) {
    const auto bytes = read_file(a.traj);
    traj = read_trajectory_csv<2>(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  const fs::path dir = a.out;
  fs::create_directories(dir);

  Manifest manifest;
  manifest.parameters = {{"command", "render"}, {"source", a.in},   {"segment", a.segment},
                         {"tail", a.tail},      {"rep", a.rep},     {"size", a.size},
                         {"sensor", to_string(stream.geometry())}};
  manifest.entries.resize(segs.size());
  parallel_for(segs.size(), [&](std::size_t i) {
    const auto& seg = segs[i];
    const auto stem = numbered("seg", i);
    const auto frame = render(seg, map, rep);
    write_file(dir / (stem + ".evf"), write_evf(frame));
    if (a.preview) write_previews(dir, stem, frame);
    auto& e = manifest.entries[i];
    e.id = stem;
    e.source = a.in;
    e.provenance = to_string(seg.provenance);
    e.first_event = seg.offset;
    e.event_count = seg.size();
    e.t_start = seg.t_start;
    e.t_end = seg.t_end;
    e.representation = std::string(representation_name(rep));
    e.frame = stem + ".evf";
    e.seed = g_opts.seed.value_or(0);
    if (traj) {
      const auto t = label_time(seg);
      write_label(dir / (stem + ".csv"), t, to_frame_coordinates(traj->at(static_cast<double>(t)), map));
      e.label = stem + ".csv";
    }
  });
  write_manifest(manifest, dir / "manifest.json");
  note("render: " + std::to_string(segs.size()) + " frames -> " + dir.string());
}

struct DenoiseArgs {
  std::string in, ec, rep = "lnecs", out;
  int sigma = 3;
  double eps = 1.0;
};

void run_denoise(const DenoiseArgs& a) {
  const auto frame = read_evf(read_file(a.in), parse_representation(a.rep));
  const auto ec = read_evf(read_file(a.ec), Representation::Ec);
  write_file(a.out, write_evf(suppress_noise(frame, ec, a.sigma, a.eps)));
}

struct AugmentArgs {
  std::string in, geometry, traj, segment = "count:10000", rep = "lnecs", size = "240x150", out;
  std::size_t samples = 1;
  std::string turns = "0,1,2,3", angle = "0:0", crop = "1:1", length = "1:1", eps = "0:2",
              sigma = "3";
};

void run_augment(const AugmentArgs& a) {
  const auto stream = load(a.in, a.geometry);
  const auto rep = parse_representation(a.rep);
  const BinningMap map(stream.geometry(), parse_size(a.size));
  const auto spec = parse_segment_spec(a.segment);
  if (spec.kind != SegmentSpec::Kind::Count) {
    throw std::invalid_argument("augment needs a count:N segment spec");
  }
  const auto bytes = read_file(a.traj);
  const auto traj =
      read_trajectory_csv<2>(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));

  AugmentRanges ranges;
  ranges.frame = map.out();
  ranges.quarter_turns = parse_int_list(a.turns);
  ranges.angle_deg = parse_interval(a.angle);
  ranges.crop_fraction = parse_interval(a.crop);
  ranges.length_multiplier = parse_interval(a.length);
  ranges.noise_threshold = parse_interval(a.eps);
  ranges.filter_sizes = parse_int_list(a.sigma);
  for (int s : ranges.filter_sizes) {
    if (s < 1 || s % 2 == 0) throw std::invalid_argument("filter sizes must be odd and positive");
  }

  // Anchors are the ends of the base count segments; each gets `samples` augmented windows.
  const auto base = segment_by_count(stream, spec.n, TailPolicy::Drop);
  const std::uint64_t seed = g_opts.seed.value_or(0);
  const fs::path dir = a.out;
  fs::create_directories(dir);

  Manifest manifest;
  manifest.parameters = {{"command", "augment"}, {"source", a.in},      {"segment", a.segment},
                         {"rep", a.rep},         {"size", a.size},      {"samples", a.samples},
                         {"turns", a.turns},     {"angle", a.angle},    {"crop", a.crop},
                         {"length", a.length},   {"eps", a.eps},        {"sigma", a.sigma},
                         {"seed", seed},         {"traj", a.traj}};
  const std::size_t total = base.size() * a.samples;
  manifest.entries.resize(total);
  parallel_for(total, [&](std::size_t i) {
    const auto anchor = base[i / a.samples].events.back().t;
    const auto aug = sample_augment(ranges, splitmix(seed ^ splitmix(i)));
    const auto seg = variable_length_segment(stream, anchor, spec.n, aug.length_multiplier);
    Frame frame = render(seg, map, rep);
    if (aug.noise_threshold > 0.0) {
      frame = suppress_noise(frame, event_count(seg, map), aug.filter_size, aug.noise_threshold);
    }
    const auto label = to_frame_coordinates(traj.at(static_cast<double>(anchor)), map);
    const auto result = apply_geometric(frame, label, aug);
    const auto stem = numbered("aug", i);
    write_file(dir / (stem + ".evf"), write_evf(result.frame));
    write_label(dir / (stem + ".csv"), anchor, result.keypoints);
    auto& e = manifest.entries[i];
    e.id = stem;
    e.source = a.in;
    e.provenance = to_string(seg.provenance);
    e.first_event = seg.offset;
    e.event_count = seg.size();
    e.t_start = seg.t_start;
    e.t_end = seg.t_end;
    e.representation = std::string(representation_name(rep));
    e.frame = stem + ".evf";
    e.label = stem + ".csv";
    e.augment = aug;
    e.seed = aug.seed;
  });
  write_manifest(manifest, dir / "manifest.json");
  note("augment: " + std::to_string(total) + " samples -> " + dir.string());
}

struct EvalArgs {
  std::string pred, gt, sweep = "0:0.01:1", out;
};

template <std::size_t Dim>
std::string evaluate(std::string_view pred_text, std::string_view gt_text, const Sweep& sweep) {
  const auto pred = read_trajectory_csv<Dim>(pred_text);
  const auto gt = read_trajectory_csv<Dim>(gt_text);
  if (pred.samples.empty() || gt.samples.empty()) throw std::invalid_argument("eval: empty trajectory");
  std::vector<KeypointSet<Dim>> preds;
  std::vector<KeypointSet<Dim>> gts;
  for (const auto& s : pred.samples) {
    preds.push_back(s.keypoints);
    gts.push_back(gt.at(static_cast<double>(s.t)));
  }
  const auto curve = pck_curve<Dim>(preds, gts, sweep);
  return eval_report(curve, sweep, preds.size(), Dim);
}

void run_eval(const EvalArgs& a) {
  const auto sweep = parse_sweep(a.sweep);
  const auto pb = read_file(a.pred);
  const auto gb = read_file(a.gt);
  const std::string_view pt(reinterpret_cast<const char*>(pb.data()), pb.size());
  const std::string_view gt(reinterpret_cast<const char*>(gb.data()), gb.size());
  const auto dims = trajectory_dimension(pt);
  if (dims != trajectory_dimension(gt)) throw std::invalid_argument("eval: pred and gt dimensions differ");
  const auto report = dims == 2 ? evaluate<2>(pt, gt, sweep) : evaluate<3>(pt, gt, sweep);
  if (a.out.empty()) {
    std::cout << report;
  } else {
    write_file(a.out, report);
  }
}

struct StatsArgs {
  std::string in, geometry;
};

void run_stats(const StatsArgs& a) {
  const auto s = load(a.in, a.geometry);
  std::size_t pos = 0;
  std::set<std::uint32_t> active;
  for (const auto& e : s.events()) {
    pos += e.p == Polarity::Pos ? 1 : 0;
    active.insert(std::uint32_t{e.y} * s.geometry().width + e.x);
  }
  std::printf("geometry: %s\n", to_string(s.geometry()).c_str());
  std::printf("events: %zu\n", s.size());
  if (s.empty()) return;
  const auto t0 = s.events().front().t;
  const auto t1 = s.events().back().t;
  std::printf("t_first_us: %llu\nt_last_us: %llu\n", static_cast<unsigned long long>(t0),
              static_cast<unsigned long long>(t1));
  const double span_s = static_cast<double>(t1 - t0 + 1) * 1e-6;
  std::printf("rate_ev_per_s: %.1f\n", static_cast<double>(s.size()) / span_s);
  std::printf("positive_fraction: %.4f\n", static_cast<double>(pos) / static_cast<double>(s.size()));
  std::printf("active_pixels: %zu\n", active.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evframe: event-camera segmentation, frame rendering, augmentation and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--threads", g_opts.threads, "Worker threads for rendering")->check(CLI::Range(1u, 256u));
  app.add_flag("--quiet,-q", g_opts.quiet, "Suppress progress messages");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Synthesize events and a keypoint trajectory from a scene");
  c_sim->add_option("--config", sim.config, "Scene JSON")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--out", sim.out, "Output stream (.evb or .csv)")->required();
  c_sim->add_option("--traj", sim.traj, "Output trajectory csv");

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "List segment boundaries");
  c_seg->add_option("--in", seg.in, "Input stream")->required()->check(CLI::ExistingFile);
  c_seg->add_option("--geometry", seg.geometry, "Sensor WxH (csv input)");
  c_seg->add_option("--segment", seg.segment, "count:N | time:MS | pixels:K | window:N@T")->capture_default_str();
  c_seg->add_option("--tail", seg.tail, "drop | emit")->capture_default_str();
  c_seg->add_option("--max-events", seg.max_events, "Cap for pixels:K segments (0 = none)");
  c_seg->add_option("--out", seg.out, "Index csv (stdout if omitted)");

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "Render segments to EVF frames with a manifest");
  c_ren->add_option("--in", ren.in, "Input stream")->required()->check(CLI::ExistingFile);
  c_ren->add_option("--geometry", ren.geometry, "Sensor WxH (csv input)");
  c_ren->add_option("--segment", ren.segment, "count:N | time:MS | pixels:K | window:N@T")->capture_default_str();
  c_ren->add_option("--tail", ren.tail, "drop | emit")->capture_default_str();
  c_ren->add_option("--max-events", ren.max_events, "Cap for pixels:K segments (0 = none)");
  c_ren->add_option("--rep", ren.rep, "ec | lnes | lnec | lnecs | lnewcs")->capture_default_str();
  c_ren->add_option("--size", ren.size, "Frame WxH")->capture_default_str();
  c_ren->add_option("--out", ren.out, "Output directory")->required();
  c_ren->add_option("--traj", ren.traj, "Trajectory csv for per-frame labels");
  c_ren->add_flag("--preview", ren.preview, "Also write per-channel PNG previews");

  DenoiseArgs den;
  auto* c_den = app.add_subcommand("denoise", "Suppress isolated activity in an EVF frame");
  c_den->add_option("--in", den.in, "Frame EVF")->required()->check(CLI::ExistingFile);
  c_den->add_option("--ec", den.ec, "Event-count EVF of the same segment")->required()->check(CLI::ExistingFile);
  c_den->add_option("--rep", den.rep, "Representation of --in")->capture_default_str();
  c_den->add_option("--sigma", den.sigma, "Odd filter size")->capture_default_str();
  c_den->add_option("--eps", den.eps, "Threshold on the local mean count")->capture_default_str();
  c_den->add_option("--out", den.out, "Output EVF")->required();

  AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "Write augmented training samples with a manifest");
  c_aug->add_option("--in", aug.in, "Input stream")->required()->check(CLI::ExistingFile);
  c_aug->add_option("--geometry", aug.geometry, "Sensor WxH (csv input)");
  c_aug->add_option("--traj", aug.traj, "Trajectory csv")->required()->check(CLI::ExistingFile);
  c_aug->add_option("--segment", aug.segment, "Base count:N")->capture_default_str();
  c_aug->add_option("--rep", aug.rep, "Representation")->capture_default_str();
  c_aug->add_option("--size", aug.size, "Frame WxH")->capture_default_str();
  c_aug->add_option("--samples", aug.samples, "Samples per anchor")->capture_default_str();
  c_aug->add_option("--turns", aug.turns, "Quarter-turn choices")->capture_default_str();
  c_aug->add_option("--angle", aug.angle, "Small-angle range in degrees")->capture_default_str();
  c_aug->add_option("--crop", aug.crop, "Crop side fraction range")->capture_default_str();
  c_aug->add_option("--length", aug.length, "Window length multiplier range")->capture_default_str();
  c_aug->add_option("--eps", aug.eps, "Noise threshold range")->capture_default_str();
  c_aug->add_option("--sigma", aug.sigma, "Filter size choices")->capture_default_str();
  c_aug->add_option("--out", aug.out, "Output directory")->required();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "PCKp curve and AUCp of predictions against ground truth");
  c_ev->add_option("--pred", ev.pred, "Predicted trajectory csv")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--gt", ev.gt, "Ground-truth trajectory csv")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--sweep", ev.sweep, "start:step:stop")->capture_default_str();
  c_ev->add_option("--out", ev.out, "Report path (stdout if omitted)");

  StatsArgs st;
  auto* c_st = app.add_subcommand("stats", "Summarize a stream");
  c_st->add_option("--in", st.in, "Input stream")->required()->check(CLI::ExistingFile);
  c_st->add_option("--geometry", st.geometry, "Sensor WxH (csv input)");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g_opts.seed = seed;

  try {
    if (*c_sim) run_simulate(sim);
    if (*c_seg) run_segment(seg);
    if (*c_ren) run_render(ren);
    if (*c_den) run_denoise(den);
    if (*c_aug) run_augment(aug);
    if (*c_ev) run_eval(ev);
    if (*c_st) run_stats(st);
  } catch (const std::exception& e) {
    std::cerr << "evframe: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
