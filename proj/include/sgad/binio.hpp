#pragma once

// Little-endian container shared by dataset and checkpoint files:
//   8-byte magic | u32 version | u32 header length | JSON header | payload
// The payload is a flat run of little-endian float32 values.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sgad::binio {

struct Container {
  nlohmann::json header;
  std::vector<float> payload;
  std::size_t payload_offset = 0;  // byte offset of the first payload value
};

void write_container(const std::string& path, std::string_view magic,
                     std::uint32_t version, const nlohmann::json& header,
                     std::span<const float> payload);

// Parses and validates magic/version; payload length must be a whole number
// of floats. ParseError offsets are byte positions in the file.
Container read_container(const std::string& path, std::string_view magic,
                         std::uint32_t version);

// Container bytes without touching the filesystem (used for hashing).
std::string encode_container(std::string_view magic, std::uint32_t version,
                             const nlohmann::json& header,
                             std::span<const float> payload);
Container decode_container(std::string_view bytes, std::string_view magic,
                           std::uint32_t version);

}  // namespace sgad::binio
