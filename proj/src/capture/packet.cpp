#include "ipal/capture/packet.hpp"

#include <charconv>

#include <fmt/format.h>

namespace ipal::capture {

namespace {

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherVlan = 0x8100;

std::optional<TcpSegment> decode_ipv4(std::span<const std::uint8_t> ip) {
  if (ip.size() < 20 || (ip[0] >> 4) != 4) return std::nullopt;
  const std::size_t ihl = (ip[0] & 0x0f) * 4u;
  const std::size_t total = be16(&ip[2]);
  if (ihl < 20 || total < ihl || ip.size() < total) return std::nullopt;
  const auto frag = be16(&ip[6]);
  if ((frag & 0x2000) || (frag & 0x1fff)) return std::nullopt;  // fragmented
  if (ip[9] != 6) return std::nullopt;

  auto tcp = ip.subspan(ihl, total - ihl);
  if (tcp.size() < 20) return std::nullopt;
  const std::size_t off = (tcp[12] >> 4) * 4u;
  if (off < 20 || off > tcp.size()) return std::nullopt;

  TcpSegment s;
  std::copy_n(&ip[12], 4, s.src.begin());
  std::copy_n(&ip[16], 4, s.dst.begin());
  s.src_port = be16(&tcp[0]);
  s.dst_port = be16(&tcp[2]);
  s.seq = be32(&tcp[4]);
  s.flags = tcp[13];
  s.payload = tcp.subspan(off);
  return s;
}

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  put16(b, static_cast<std::uint16_t>(v >> 16));
  put16(b, static_cast<std::uint16_t>(v & 0xffff));
}

}  // namespace

std::string to_string(const Ipv4& a) { return fmt::format("{}.{}.{}.{}", a[0], a[1], a[2], a[3]); }

std::optional<Ipv4> parse_ipv4(std::string_view s) {
  Ipv4 out{};
  const char* p = s.data();
  const char* end = s.data() + s.size();
  for (int i = 0; i < 4; ++i) {
    unsigned v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{} || v > 255) return std::nullopt;
    out[i] = static_cast<std::uint8_t>(v);
    p = next;
    if (i < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return out;
}

std::optional<TcpSegment> decode_tcp(LinkType link, std::span<const std::uint8_t> frame) {
  switch (link) {
    case LinkType::ethernet: {
      if (frame.size() < 14) return std::nullopt;
      std::size_t off = 12;
      auto ether_type = be16(&frame[off]);
      off += 2;
      while (ether_type == kEtherVlan) {
        if (frame.size() < off + 4) return std::nullopt;
        ether_type = be16(&frame[off + 2]);
        off += 4;
      }
      if (ether_type != kEtherIpv4) return std::nullopt;
      return decode_ipv4(frame.subspan(off));
    }
    case LinkType::linux_sll:
      if (frame.size() < 16 || be16(&frame[14]) != kEtherIpv4) return std::nullopt;
      return decode_ipv4(frame.subspan(16));
    case LinkType::null_loopback:
      if (frame.size() < 4) return std::nullopt;
      return decode_ipv4(frame.subspan(4));
    case LinkType::raw_ip:
    case LinkType::ipv4:
      return decode_ipv4(frame);
  }
  return std::nullopt;
}

std::vector<std::uint8_t> build_tcp_frame(const TcpFrameSpec& spec, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> b;
  b.reserve(54 + payload.size());
  // Ethernet: locally administered MACs derived from the IPv4 host byte.
  const std::uint8_t dst_mac[6] = {0x02, 0, 0, 0, 0, spec.dst[3]};
  const std::uint8_t src_mac[6] = {0x02, 0, 0, 0, 0, spec.src[3]};
  b.insert(b.end(), dst_mac, dst_mac + 6);
  b.insert(b.end(), src_mac, src_mac + 6);
  put16(b, kEtherIpv4);

  const std::size_t ip_start = b.size();
  const auto total = static_cast<std::uint16_t>(20 + 20 + payload.size());
  b.push_back(0x45);
  b.push_back(0);
  put16(b, total);
  put16(b, 0);       // identification
  put16(b, 0x4000);  // don't fragment
  b.push_back(64);
  b.push_back(6);
  put16(b, 0);  // checksum placeholder
  b.insert(b.end(), spec.src.begin(), spec.src.end());
  b.insert(b.end(), spec.dst.begin(), spec.dst.end());
  std::uint32_t sum = 0;
  for (std::size_t i = ip_start; i < ip_start + 20; i += 2) sum += be16(&b[i]);
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  const auto csum = static_cast<std::uint16_t>(~sum);
  b[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
  b[ip_start + 11] = static_cast<std::uint8_t>(csum & 0xff);

  put16(b, spec.src_port);
  put16(b, spec.dst_port);
  put32(b, spec.seq);
  put32(b, spec.ack);
  b.push_back(0x50);
  b.push_back(spec.flags);
  put16(b, 65535);  // window
  put16(b, 0);      // checksum left zero
  put16(b, 0);      // urgent
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

}  // namespace ipal::capture
