#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipal/capture/pcap.hpp"

namespace ipal::capture {

using Ipv4 = std::array<std::uint8_t, 4>;

std::string to_string(const Ipv4& a);
std::optional<Ipv4> parse_ipv4(std::string_view s);

namespace tcp_flag {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
}  // namespace tcp_flag

/// A TCP segment view into a decoded frame. `payload` aliases the frame.
struct TcpSegment {
  Ipv4 src{};
  Ipv4 dst{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint8_t flags = 0;
  std::span<const std::uint8_t> payload;
};

/// Strips link, IPv4 and TCP headers. Returns nullopt for anything that is not
/// an unfragmented IPv4/TCP packet.
std::optional<TcpSegment> decode_tcp(LinkType link, std::span<const std::uint8_t> frame);

struct TcpFrameSpec {
  Ipv4 src{};
  Ipv4 dst{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t flags = tcp_flag::ack | tcp_flag::psh;
};

/// Ethernet II + IPv4 + TCP frame carrying `payload`, with valid IPv4 checksum.
std::vector<std::uint8_t> build_tcp_frame(const TcpFrameSpec& spec, std::span<const std::uint8_t> payload);

}  // namespace ipal::capture
