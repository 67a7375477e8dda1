#pragma once

// EVF frame tensors: "EVF1", u16 channels, u16 height, u16 width, then channels * height *
// width little-endian float32 values, channel-major and row-major. Channel labels are not
// stored; readers supply the representation.

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evframe/representation.hpp"
#include "evframe/stream_io.hpp"

namespace evframe {

inline constexpr std::size_t kEvfHeaderSize = 10;

inline Bytes write_evf(const Frame& frame) {
  const auto c = frame.channel_count();
  const auto& g = frame.geometry;
  if (c > 0xFFFF || g.width > 0xFFFF || g.height > 0xFFFF) {
    throw std::invalid_argument("frame dimensions exceed EVF u16 fields");
  }
  Bytes out(kEvfHeaderSize + 4 * frame.data.size());
  const auto put = [&out](std::size_t at, std::uint32_t v, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  std::memcpy(out.data(), "EVF1", 4);
  put(4, static_cast<std::uint32_t>(c), 2);
  put(6, g.height, 2);
  put(8, g.width, 2);
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    put(kEvfHeaderSize + 4 * i, std::bit_cast<std::uint32_t>(frame.data[i]), 4);
  }
  return out;
}

struct EvfHeader {
  std::uint16_t channels;
  SensorGeometry geometry;
};

inline EvfHeader read_evf_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEvfHeaderSize || std::memcmp(bytes.data(), "EVF1", 4) != 0) {
    throw ParseError("evf: missing EVF1 header", 0);
  }
  EvfHeader h;
  h.channels = detail::get_le<std::uint16_t>(bytes, 4);
  h.geometry.height = detail::get_le<std::uint16_t>(bytes, 6);
  h.geometry.width = detail::get_le<std::uint16_t>(bytes, 8);
  const std::size_t expected =
      kEvfHeaderSize + 4 * std::size_t{h.channels} * h.geometry.pixel_count();
  if (bytes.size() != expected) {
    throw ParseError("evf: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size()),
                     kEvfHeaderSize);
  }
  return h;
}

/// Decodes an EVF tensor as representation `rep`; the channel count must agree.
inline Frame read_evf(std::span<const std::uint8_t> bytes, Representation rep) {
  const auto h = read_evf_header(bytes);
  auto labels = channels_of(rep);
  if (labels.size() != h.channels) {
    throw std::invalid_argument("evf has " + std::to_string(h.channels) + " channels but " +
                                std::string(representation_name(rep)) + " has " +
                                std::to_string(labels.size()));
  }
  Frame f(std::move(labels), h.geometry);
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    f.data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, kEvfHeaderSize + 4 * i));
  }
  return f;
}

}  // namespace evframe
