#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

#include "ipal/error.hpp"
#include "ipal/message.hpp"

namespace ipal::capture {

/// Link-layer header types from the libpcap registry that we can decode.
enum class LinkType : std::uint32_t {
  null_loopback = 0,
  ethernet = 1,
  raw_ip = 101,
  linux_sll = 113,
  ipv4 = 228,
};

bool is_supported(LinkType t);

struct Frame {
  Timestamp timestamp{};
  std::vector<std::uint8_t> data;
  std::uint32_t original_length = 0;
};

class TruncatedCapture : public DataError {
 public:
  using DataError::DataError;
};

/// Streaming reader for classic libpcap files (both byte orders, micro- and
/// nanosecond variants). Frames come back in file order.
class PcapReader {
 public:
  explicit PcapReader(const std::filesystem::path& path);

  LinkType link_type() const { return link_type_; }

  /// Next frame, or nullopt at a clean end of file. A partial record header
  /// or body raises TruncatedCapture.
  std::optional<Frame> next();

 private:
  std::uint32_t read_u32(const std::uint8_t* p) const;

  std::ifstream in_;
  bool swapped_ = false;
  bool nanos_ = false;
  LinkType link_type_ = LinkType::ethernet;
  std::size_t frame_index_ = 0;
};

class PcapWriter {
 public:
  PcapWriter(const std::filesystem::path& path, LinkType link = LinkType::ethernet);

  void write(Timestamp t, std::span<const std::uint8_t> frame);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Reads a whole capture. `expected` rejects captures of another link type.
std::vector<Frame> read_capture(const std::filesystem::path& path, std::optional<LinkType> expected = std::nullopt);

}  // namespace ipal::capture
