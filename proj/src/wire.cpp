#include "fedcd/wire.hpp"

#include <array>
#include <bit>
#include <cstring>

namespace fedcd {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
  put_u32(out, static_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

std::uint64_t get_u64(const std::uint8_t* p) {
  return (std::uint64_t{get_u32(p)} << 32) | get_u32(p + 4);
}

const std::array<std::uint32_t, 256>& crc_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      }
      t[i] = c;
    }
    return t;
  }();
  return table;
}

}  // namespace

const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Hello: return "HELLO";
    case MsgType::UUpload: return "U_UPLOAD";
    case MsgType::UBroadcast: return "U_BROADCAST";
    case MsgType::PhiUpload: return "PHI_UPLOAD";
    case MsgType::PhiBroadcast: return "PHI_BROADCAST";
    case MsgType::Schedule: return "SCHEDULE";
    case MsgType::Done: return "DONE";
  }
  return "UNKNOWN";
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
  const auto& table = crc_table();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

std::vector<std::uint8_t> tcp_encode(const RoundMessage& msg) {
  static_assert(sizeof(double) == 8);
  const std::size_t payload_bytes = msg.payload.size() * 8;
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeaderBytes + payload_bytes + 4);
  put_u32(out, kWireMagic);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  put_u32(out, msg.outer_t);
  put_u32(out, msg.round);
  put_u32(out, msg.d);
  put_u64(out, payload_bytes);
  for (double v : msg.payload) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    const std::size_t at = out.size();
    out.resize(at + 8);
    std::memcpy(out.data() + at, &bits, 8);
  }
  put_u32(out, crc32(out.data() + kWireHeaderBytes, payload_bytes));
  return out;
}

RoundMessage tcp_decode(const std::uint8_t* data, std::size_t len) {
  if (len < kWireHeaderBytes + 4) {
    throw ProtocolError("tcp_decode: truncated frame (header)");
  }
  if (get_u32(data) != kWireMagic) {
    throw ProtocolError("tcp_decode: bad magic");
  }
  if (data[4] != kWireVersion) {
    throw ProtocolError("tcp_decode: unsupported version " +
                        std::to_string(int{data[4]}));
  }
  const std::uint8_t raw_type = data[5];
  if (raw_type < 1 || raw_type > 7) {
    throw ProtocolError("tcp_decode: unknown msg_type " +
                        std::to_string(int{raw_type}));
  }
  RoundMessage msg;
  msg.type = static_cast<MsgType>(raw_type);
  msg.outer_t = get_u32(data + 6);
  msg.round = get_u32(data + 10);
  msg.d = get_u32(data + 14);
  const std::uint64_t payload_bytes = get_u64(data + 18);
  if (payload_bytes % 8 != 0) {
    throw ProtocolError("tcp_decode: payload_len not a multiple of 8");
  }
  if (len != kWireHeaderBytes + payload_bytes + 4) {
    throw ProtocolError("tcp_decode: truncated frame (payload)");
  }
  const std::uint8_t* body = data + kWireHeaderBytes;
  const std::uint32_t want = get_u32(body + payload_bytes);
  if (crc32(body, payload_bytes) != want) {
    throw ProtocolError("tcp_decode: CRC mismatch");
  }
  msg.payload.resize(payload_bytes / 8);
  for (std::size_t i = 0; i < msg.payload.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, body + 8 * i, 8);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    std::memcpy(&msg.payload[i], &bits, 8);
  }
  return msg;
}

RoundMessage tcp_decode(const std::vector<std::uint8_t>& frame) {
  return tcp_decode(frame.data(), frame.size());
}

}  // namespace fedcd
