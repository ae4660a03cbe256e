#include "sgad/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sgad/errors.hpp"

namespace sgad::binio {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_container(std::string_view magic, std::uint32_t version,
                             const nlohmann::json& header,
                             std::span<const float> payload) {
  const std::string text = header.dump();
  std::string out;
  out.reserve(magic.size() + 8 + text.size() + payload.size() * 4);
  out.append(magic);
  put_u32(out, version);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  for (float f : payload) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Container decode_container(std::string_view bytes, std::string_view magic,
                           std::uint32_t version) {
  const std::size_t fixed = magic.size() + 8;
  if (bytes.size() < magic.size()) throw ParseError("truncated magic", bytes.size());
  if (bytes.substr(0, magic.size()) != magic) throw ParseError("bad magic", 0);
  if (bytes.size() < fixed) throw ParseError("truncated preamble", bytes.size());
  const std::uint32_t got_version = get_u32(bytes, magic.size());
  if (got_version != version) {
    throw VersionError("unsupported format version " + std::to_string(got_version) +
                       " (expected " + std::to_string(version) + ")");
  }
  const std::uint32_t header_len = get_u32(bytes, magic.size() + 4);
  if (bytes.size() < fixed + header_len) {
    throw ParseError("truncated header", bytes.size());
  }
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(fixed, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed header: ") + e.what(), fixed + e.byte);
  }
  c.payload_offset = fixed + header_len;
  const std::size_t rest = bytes.size() - c.payload_offset;
  if (rest % 4 != 0) {
    throw ParseError("payload is not a whole number of float32 values",
                     bytes.size() - rest % 4);
  }
  c.payload.resize(rest / 4);
  for (std::size_t i = 0; i < c.payload.size(); ++i) {
    c.payload[i] = std::bit_cast<float>(get_u32(bytes, c.payload_offset + 4 * i));
  }
  return c;
}

void write_container(const std::string& path, std::string_view magic,
                     std::uint32_t version, const nlohmann::json& header,
                     std::span<const float> payload) {
  const std::string bytes = encode_container(magic, version, header, payload);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

Container read_container(const std::string& path, std::string_view magic,
                         std::uint32_t version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return decode_container(bytes, magic, version);
}

}  // namespace sgad::binio
