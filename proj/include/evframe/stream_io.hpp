#pragma once

// Event stream serialization.
//
// csv: UTF-8 lines "t,x,y,p" with p in {1,-1}; an optional "t,x,y,p" header line.
// evb: "EVB1" magic, u16 width, u16 height, u64 record count, then 16-byte little-endian
//      records {u64 t, u16 x, u16 y, i8 p, 3 zero pad bytes}.

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "evframe/event.hpp"

namespace evframe {

using Bytes = std::vector<std::uint8_t>;

enum class StreamFormat { Csv, Evb };

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::uint64_t location)
      : std::runtime_error(what), location_(location) {}
  /// 1-based line for csv, byte offset for evb.
  std::uint64_t location() const noexcept { return location_; }

 private:
  std::uint64_t location_;
};

struct LoadOptions {
  /// Accept 3-field csv lines "t,x,y" and map them to Pos.
  bool missing_polarity_is_pos = false;
};

namespace detail {

template <typename T>
void put_le(Bytes& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline constexpr std::string_view kEvbMagic = "EVB1";
inline constexpr std::size_t kEvbHeaderSize = 16;
inline constexpr std::size_t kEvbRecordSize = 16;

inline std::vector<Event> parse_csv(std::string_view text, const LoadOptions& options) {
  std::vector<Event> events;
  std::uint64_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line_no == 1 && (line == "t,x,y,p" || (options.missing_polarity_is_pos && line == "t,x,y"))) {
      continue;
    }

    std::string_view fields[4];
    std::size_t count = 0;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      if (count == 4) {
        throw ParseError("line " + std::to_string(line_no) + ": too many fields", line_no);
      }
      fields[count++] = trim(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (count != 4 && !(count == 3 && options.missing_polarity_is_pos)) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields t,x,y,p, got " +
                           std::to_string(count),
                       line_no);
    }

    const auto parse_u64 = [&](std::string_view f, const char* name) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec == std::errc::result_out_of_range) {
        throw ParseError("line " + std::to_string(line_no) + ": " + name + " overflows u64",
                         line_no);
      }
      if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed " + name + " '" +
                             std::string(f) + "'",
                         line_no);
      }
      return v;
    };

    const auto t = parse_u64(fields[0], "timestamp");
    const auto x = parse_u64(fields[1], "x");
    const auto y = parse_u64(fields[2], "y");
    if (x > 0xFFFF || y > 0xFFFF) {
      throw OutOfBoundsError("line " + std::to_string(line_no) + ": coordinate (" +
                             std::to_string(x) + ", " + std::to_string(y) +
                             ") exceeds 16-bit range");
    }
    Polarity p = Polarity::Pos;
    if (count == 4) {
      if (fields[3] == "1" || fields[3] == "+1") {
        p = Polarity::Pos;
      } else if (fields[3] == "-1") {
        p = Polarity::Neg;
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": polarity must be 1 or -1, got '" +
                             std::string(fields[3]) + "'",
                         line_no);
      }
    }
    events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), p});
  }
  return events;
}

struct EvbContents {
  SensorGeometry geometry;
  std::vector<Event> events;
};

inline EvbContents parse_evb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEvbHeaderSize) {
    throw ParseError("evb: truncated header (" + std::to_string(bytes.size()) + " bytes)", 0);
  }
  if (std::memcmp(bytes.data(), kEvbMagic.data(), kEvbMagic.size()) != 0) {
    throw ParseError("evb: bad magic", 0);
  }
  EvbContents out;
  out.geometry.width = get_le<std::uint16_t>(bytes, 4);
  out.geometry.height = get_le<std::uint16_t>(bytes, 6);
  const auto count = get_le<std::uint64_t>(bytes, 8);
  const auto payload = bytes.size() - kEvbHeaderSize;
  if (payload % kEvbRecordSize != 0 || payload / kEvbRecordSize != count) {
    throw ParseError("evb: header declares " + std::to_string(count) + " records but payload is " +
                         std::to_string(payload) + " bytes",
                     8);
  }
  out.events.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = kEvbHeaderSize + i * kEvbRecordSize;
    Event e;
    e.t = get_le<std::uint64_t>(bytes, off);
    e.x = get_le<std::uint16_t>(bytes, off + 8);
    e.y = get_le<std::uint16_t>(bytes, off + 10);
    const auto p = static_cast<std::int8_t>(bytes[off + 12]);
    if (p != 1 && p != -1) {
      throw ParseError("evb: record " + std::to_string(i) + " has invalid polarity " +
                           std::to_string(p),
                       off + 12);
    }
    if (bytes[off + 13] != 0 || bytes[off + 14] != 0 || bytes[off + 15] != 0) {
      throw ParseError("evb: record " + std::to_string(i) + " has non-zero padding", off + 13);
    }
    e.p = static_cast<Polarity>(p);
    out.events.push_back(e);
  }
  return out;
}

}  // namespace detail

/// Parses, stable-sorts by time and validates against `geometry`. For evb sources the
/// file header geometry is used when `geometry` is empty; csv sources require one.
inline EventStream load_stream(std::span<const std::uint8_t> source, StreamFormat format,
                               std::optional<SensorGeometry> geometry,
                               const LoadOptions& options = {}) {
  if (format == StreamFormat::Csv) {
    if (!geometry) throw std::invalid_argument("csv streams need an explicit sensor geometry");
    const std::string_view text(reinterpret_cast<const char*>(source.data()), source.size());
    return EventStream::from_unsorted(detail::parse_csv(text, options), *geometry);
  }
  auto contents = detail::parse_evb(source);
  return EventStream::from_unsorted(std::move(contents.events), geometry.value_or(contents.geometry));
}

inline Bytes write_stream(const EventStream& stream, StreamFormat format) {
  Bytes out;
  if (format == StreamFormat::Csv) {
    std::string text = "t,x,y,p\n";
    text.reserve(text.size() + stream.size() * 24);
    for (const auto& e : stream.events()) {
      text += std::to_string(e.t);
      text += ',';
      text += std::to_string(e.x);
      text += ',';
      text += std::to_string(e.y);
      text += e.p == Polarity::Pos ? ",1\n" : ",-1\n";
    }
    out.assign(text.begin(), text.end());
    return out;
  }
  const auto& g = stream.geometry();
  if (g.width > 0xFFFF || g.height > 0xFFFF) {
    throw std::invalid_argument("evb: geometry " + to_string(g) + " exceeds u16 header fields");
  }
  out.reserve(detail::kEvbHeaderSize + stream.size() * detail::kEvbRecordSize);
  out.insert(out.end(), detail::kEvbMagic.begin(), detail::kEvbMagic.end());
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(g.width));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(g.height));
  detail::put_le<std::uint64_t>(out, stream.size());
  for (const auto& e : stream.events()) {
    detail::put_le<std::uint64_t>(out, e.t);
    detail::put_le<std::uint16_t>(out, e.x);
    detail::put_le<std::uint16_t>(out, e.y);
    out.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(e.p)));
    out.insert(out.end(), 3, 0);
  }
  return out;
}

inline StreamFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? StreamFormat::Csv : StreamFormat::Evb;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()));
}

}  // namespace evframe
