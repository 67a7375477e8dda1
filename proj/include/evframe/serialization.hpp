#pragma once

// JSON forms of scene configs, augment specs and dataset manifests.

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evframe/augment.hpp"
#include "evframe/simulator.hpp"
#include "evframe/stream_io.hpp"

namespace evframe {

using json = nlohmann::json;

namespace detail {

inline Vec2 vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Path path_from(const json& j) {
  Path p;
  const auto kind = j.value("kind", std::string("static"));
  if (kind == "static") {
    p.kind = Path::Kind::Static;
    p.from = vec2_from(j.at("at"));
  } else if (kind == "linear") {
    p.kind = Path::Kind::Linear;
    p.from = vec2_from(j.at("from"));
    p.to = vec2_from(j.at("to"));
  } else if (kind == "circle") {
    p.kind = Path::Kind::Circle;
    p.from = vec2_from(j.at("center"));
    p.radius = j.at("radius").get<double>();
    p.revolutions = j.value("revolutions", 1.0);
    p.phase_deg = j.value("phase_deg", 0.0);
  } else if (kind == "sine") {
    p.kind = Path::Kind::Sine;
    p.from = vec2_from(j.at("center"));
    p.to = vec2_from(j.at("amplitude"));
    p.frequency_hz = j.value("frequency_hz", 1.0);
    p.phase_deg = j.value("phase_deg", 0.0);
  } else {
    throw std::invalid_argument("unknown path kind '" + kind + "'");
  }
  return p;
}

inline Shape shape_from(const json& j) {
  Shape s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "disc") {
    s.kind = Shape::Kind::Disc;
  } else if (kind == "bar") {
    s.kind = Shape::Kind::Bar;
  } else if (kind == "chain") {
    s.kind = Shape::Kind::Chain;
  } else {
    throw std::invalid_argument("unknown shape kind '" + kind + "'");
  }
  s.size = j.at("size").get<double>();
  s.contrast = j.value("contrast", 2.0);
  s.path = path_from(j.at("path"));
  s.length = j.value("length", 20.0);
  s.angle_deg = j.value("angle_deg", 0.0);
  s.angular_velocity_deg_s = j.value("angular_velocity_deg_s", 0.0);
  s.segment_lengths = j.value("segment_lengths", std::vector<double>{});
  s.joint_angles_deg = j.value("joint_angles_deg", std::vector<double>{});
  s.joint_amplitudes_deg = j.value("joint_amplitudes_deg", std::vector<double>{});
  s.joint_frequency_hz = j.value("joint_frequency_hz", 1.0);
  s.slots = j.value("slots", std::vector<std::size_t>{});
  return s;
}

}  // namespace detail

/// Scene description, e.g.
///   {"width": 240, "height": 150, "duration_us": 500000, "contrast_threshold": 0.2,
///    "noise_rate": 0.5, "seed": 7,
///    "shapes": [{"kind": "disc", "size": 8, "contrast": 3,
///                "path": {"kind": "linear", "from": [30, 75], "to": [210, 75]}}]}
inline SceneConfig scene_from_json(const json& j) {
  SceneConfig cfg;
  try {
    cfg.geometry = {j.value("width", 240u), j.value("height", 150u)};
    cfg.duration = j.at("duration_us").get<Duration>();
    cfg.contrast_threshold = j.value("contrast_threshold", 0.2);
    cfg.noise.rate = j.value("noise_rate", 0.0);
    cfg.noise.burst_hz = j.value("noise_burst_hz", 0.0);
    cfg.noise.burst_width_us = j.value("noise_burst_width_us", Duration{500});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.trajectory_rate_hz = j.value("trajectory_rate_hz", 1000.0);
    cfg.max_step_px = j.value("max_step_px", 0.25);
    for (const auto& s : j.value("shapes", json::array())) cfg.shapes.push_back(detail::shape_from(s));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scene config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

inline json to_json(const AugmentSpec& spec) {
  json j{{"input_width", spec.input_size.width},
         {"input_height", spec.input_size.height},
         {"quarter_turns", spec.quarter_turns},
         {"angle_deg", spec.angle_deg},
         {"length_multiplier", spec.length_multiplier},
         {"noise_threshold", spec.noise_threshold},
         {"filter_size", spec.filter_size},
         {"seed", spec.seed}};
  if (spec.crop) {
    j["crop"] = {spec.crop->x0, spec.crop->y0, spec.crop->width, spec.crop->height};
  } else {
    j["crop"] = nullptr;
  }
  return j;
}

inline AugmentSpec augment_from_json(const json& j) {
  AugmentSpec spec;
  spec.input_size = {j.at("input_width").get<std::uint32_t>(), j.at("input_height").get<std::uint32_t>()};
  spec.quarter_turns = j.at("quarter_turns").get<int>();
  spec.angle_deg = j.at("angle_deg").get<double>();
  spec.length_multiplier = j.at("length_multiplier").get<double>();
  spec.noise_threshold = j.at("noise_threshold").get<double>();
  spec.filter_size = j.at("filter_size").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("crop").is_null()) {
    const auto& c = j.at("crop");
    spec.crop = CropRect{c.at(0).get<std::uint32_t>(), c.at(1).get<std::uint32_t>(),
                         c.at(2).get<std::uint32_t>(), c.at(3).get<std::uint32_t>()};
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string source;       // stream the segment came from
  std::string provenance;   // e.g. "count:10000"
  std::size_t first_event = 0;
  std::size_t event_count = 0;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  std::string representation;
  std::string frame;        // EVF path, relative to the manifest directory
  std::string label;        // trajectory csv path (single row), may be empty
  std::optional<AugmentSpec> augment;
  std::uint64_t seed = 0;
};

/// Entries plus the parameters that produced them. Paths are relative to the manifest file.
struct Manifest {
  json parameters = json::object();
  std::vector<ManifestEntry> entries;
};

inline json to_json(const Manifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"id", e.id},
                       {"source", e.source},
                       {"provenance", e.provenance},
                       {"first_event", e.first_event},
                       {"event_count", e.event_count},
                       {"t_start", e.t_start},
                       {"t_end", e.t_end},
                       {"representation", e.representation},
                       {"frame", e.frame},
                       {"label", e.label},
                       {"augment", e.augment ? to_json(*e.augment) : json(nullptr)},
                       {"seed", e.seed}});
  }
  return {{"format", "evframe-manifest-1"}, {"parameters", m.parameters}, {"entries", entries}};
}

inline Manifest manifest_from_json(const json& j) {
  if (j.value("format", std::string()) != "evframe-manifest-1") {
    throw std::invalid_argument("not an evframe manifest");
  }
  Manifest m;
  m.parameters = j.value("parameters", json::object());
  for (const auto& e : j.at("entries")) {
    ManifestEntry entry;
    entry.id = e.at("id").get<std::string>();
    entry.source = e.at("source").get<std::string>();
    entry.provenance = e.at("provenance").get<std::string>();
    entry.first_event = e.at("first_event").get<std::size_t>();
    entry.event_count = e.at("event_count").get<std::size_t>();
    entry.t_start = e.at("t_start").get<Timestamp>();
    entry.t_end = e.at("t_end").get<Timestamp>();
    entry.representation = e.at("representation").get<std::string>();
    entry.frame = e.at("frame").get<std::string>();
    entry.label = e.at("label").get<std::string>();
    if (!e.at("augment").is_null()) entry.augment = augment_from_json(e.at("augment"));
    entry.seed = e.value("seed", std::uint64_t{0});
    m.entries.push_back(std::move(entry));
  }
  return m;
}

/// Checks unique ids and that every referenced file exists relative to `base`.
inline void validate(const Manifest& m, const std::filesystem::path& base) {
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    if (!ids.insert(e.id).second) throw std::invalid_argument("duplicate manifest id '" + e.id + "'");
    for (const auto* path : {&e.frame, &e.label}) {
      if (!path->empty() && !std::filesystem::exists(base / *path)) {
        throw std::runtime_error("manifest entry '" + e.id + "' references missing file " + *path);
      }
    }
  }
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  validate(m, path.parent_path());
  write_file(path, to_json(m).dump(2) + "\n");
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return manifest_from_json(json::parse(bytes.begin(), bytes.end()));
}

}  // namespace evframe
