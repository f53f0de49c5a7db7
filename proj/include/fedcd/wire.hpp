#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedcd/errors.hpp"

namespace fedcd {

constexpr std::uint32_t kWireMagic = 0x46434431;  // "FCD1"
constexpr std::uint8_t kWireVersion = 1;

enum class MsgType : std::uint8_t {
  Hello = 1,
  UUpload = 2,
  UBroadcast = 3,
  PhiUpload = 4,
  PhiBroadcast = 5,
  Schedule = 6,
  Done = 7,
};

const char* msg_type_name(MsgType t);

// One protocol message.  The payload is a flat row-major vector of doubles;
// its meaning depends on the type (proxy matrix, stacked network weights,
// schedule coefficients, or client id).
struct RoundMessage {
  MsgType type = MsgType::Hello;
  std::uint32_t outer_t = 0;
  std::uint32_t round = 0;
  std::uint32_t d = 0;
  std::vector<double> payload;

  bool operator==(const RoundMessage&) const = default;
};

// Frame layout, all header integers big-endian:
//   magic u32, version u8, msg_type u8, outer_t u32, round u32, d u32,
//   payload_len u64 (bytes), payload (little-endian f64s), crc32 u32
// where crc32 covers the payload bytes (polynomial 0xEDB88320).
std::vector<std::uint8_t> tcp_encode(const RoundMessage& msg);

// Decodes one complete frame.  Throws ProtocolError naming the offending
// field on bad magic, version mismatch, unknown type, truncation, length
// inconsistency, or CRC mismatch.
RoundMessage tcp_decode(const std::uint8_t* data, std::size_t len);
RoundMessage tcp_decode(const std::vector<std::uint8_t>& frame);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

constexpr std::size_t kWireHeaderBytes = 4 + 1 + 1 + 4 + 4 + 4 + 8;

// Audit record of one transmitted message, kept by both transports so
// privacy assertions can run against either.
struct MessageLogEntry {
  MsgType type;
  int client;      // counterpart client id; -1 for unattributed
  bool to_server;  // direction: true = client uploads, false = server sends
  std::uint32_t outer_t;
  std::uint32_t round;
  std::size_t payload_bytes;
};

}  // namespace fedcd
