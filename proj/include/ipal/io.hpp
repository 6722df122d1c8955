#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipal/message.hpp"

namespace ipal {

/// Line-oriented reader over `.ipal`, `.state` or `.alerts` files. Blank
/// lines are skipped; parse errors carry the 1-based line number.
template <typename Record>
class RecordReader {
 public:
  explicit RecordReader(const std::filesystem::path& path);

  std::optional<Record> next();
  std::size_t line_number() const { return line_no_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::string buffer_;
  std::size_t line_no_ = 0;
};

using MessageReader = RecordReader<IpalMessage>;
using StateReader = RecordReader<StateMessage>;
using AlertReader = RecordReader<AlertEvent>;

template <typename Record>
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path);

  void write(const Record& r);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

using MessageWriter = RecordWriter<IpalMessage>;
using StateWriter = RecordWriter<StateMessage>;
using AlertWriter = RecordWriter<AlertEvent>;

std::vector<IpalMessage> read_messages(const std::filesystem::path& path);
std::vector<StateMessage> read_states(const std::filesystem::path& path);
std::vector<AlertEvent> read_alerts(const std::filesystem::path& path);

void write_messages(const std::filesystem::path& path, std::span<const IpalMessage> msgs);
void write_states(const std::filesystem::path& path, std::span<const StateMessage> states);
void write_alerts(const std::filesystem::path& path, std::span<const AlertEvent> alerts);

enum class StreamKind { messages, states };

/// Decides by extension (`.ipal` / `.state`), falling back to the keys of the
/// first record.
StreamKind sniff_stream_kind(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// FNV-1a, 64 bit. Used for content keys and input digests.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace ipal
