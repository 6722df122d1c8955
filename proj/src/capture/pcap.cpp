#include "ipal/capture/pcap.hpp"

#include <array>
#include <cstring>

#include <fmt/format.h>

namespace ipal::capture {

namespace {

constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
constexpr std::uint32_t kSnapLen = 262144;

std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                        static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
  out.write(b.data(), b.size());
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b.data(), b.size());
}

}  // namespace

bool is_supported(LinkType t) {
  switch (t) {
    case LinkType::null_loopback:
    case LinkType::ethernet:
    case LinkType::raw_ip:
    case LinkType::linux_sll:
    case LinkType::ipv4:
      return true;
  }
  return false;
}

PcapReader::PcapReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw DataError(fmt::format("cannot open capture {}", path.string()));
  std::array<std::uint8_t, 24> header{};
  in_.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in_.gcount() != static_cast<std::streamsize>(header.size()))
    throw DataError(fmt::format("{}: not a pcap file (short global header)", path.string()));

  std::uint32_t magic;
  std::memcpy(&magic, header.data(), 4);
  if (magic == kMagicMicros || magic == kMagicNanos) {
    swapped_ = false;
  } else if (bswap32(magic) == kMagicMicros || bswap32(magic) == kMagicNanos) {
    swapped_ = true;
    magic = bswap32(magic);
  } else {
    throw DataError(fmt::format("{}: unrecognised capture magic {:#010x}", path.string(), magic));
  }
  nanos_ = magic == kMagicNanos;

  const auto link = read_u32(header.data() + 20) & 0x0fffffff;
  link_type_ = static_cast<LinkType>(link);
  if (!is_supported(link_type_))
    throw DataError(fmt::format("{}: unsupported link type {}", path.string(), link));
}

std::uint32_t PcapReader::read_u32(const std::uint8_t* p) const {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return swapped_ ? bswap32(v) : v;
}

std::optional<Frame> PcapReader::next() {
  std::array<std::uint8_t, 16> rec{};
  in_.read(reinterpret_cast<char*>(rec.data()), rec.size());
  const auto got = in_.gcount();
  if (got == 0) return std::nullopt;
  if (got != static_cast<std::streamsize>(rec.size()))
    throw TruncatedCapture(fmt::format("truncated capture: partial record header after frame {}", frame_index_));

  const auto sec = read_u32(rec.data());
  const auto frac = read_u32(rec.data() + 4);
  const auto incl = read_u32(rec.data() + 8);
  const auto orig = read_u32(rec.data() + 12);
  if (incl > kSnapLen)
    throw DataError(fmt::format("frame {} claims {} captured bytes", frame_index_, incl));

  Frame f;
  const std::int64_t micros = nanos_ ? frac / 1000 : frac;
  f.timestamp = Timestamp{Duration{static_cast<std::int64_t>(sec) * 1000000 + micros}};
  f.original_length = orig;
  f.data.resize(incl);
  in_.read(reinterpret_cast<char*>(f.data.data()), incl);
  if (in_.gcount() != static_cast<std::streamsize>(incl))
    throw TruncatedCapture(fmt::format("truncated capture: frame {} has {} of {} bytes", frame_index_,
                                       in_.gcount(), incl));
  ++frame_index_;
  return f;
}

PcapWriter::PcapWriter(const std::filesystem::path& path, LinkType link) : out_(path, std::ios::binary) {
  if (!out_) throw DataError(fmt::format("cannot write capture {}", path.string()));
  put_u32(out_, kMagicMicros);
  put_u16(out_, 2);
  put_u16(out_, 4);
  put_u32(out_, 0);
  put_u32(out_, 0);
  put_u32(out_, kSnapLen);
  put_u32(out_, static_cast<std::uint32_t>(link));
}

void PcapWriter::write(Timestamp t, std::span<const std::uint8_t> frame) {
  const auto us = t.time_since_epoch().count();
  put_u32(out_, static_cast<std::uint32_t>(us / 1000000));
  put_u32(out_, static_cast<std::uint32_t>(us % 1000000));
  put_u32(out_, static_cast<std::uint32_t>(frame.size()));
  put_u32(out_, static_cast<std::uint32_t>(frame.size()));
  out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
}

std::vector<Frame> read_capture(const std::filesystem::path& path, std::optional<LinkType> expected) {
  PcapReader reader(path);
  if (expected && reader.link_type() != *expected)
    throw DataError(fmt::format("{}: link type {} but {} was requested", path.string(),
                                static_cast<std::uint32_t>(reader.link_type()), static_cast<std::uint32_t>(*expected)));
  std::vector<Frame> out;
  while (auto f = reader.next()) out.push_back(std::move(*f));
  return out;
}

}  // namespace ipal::capture
