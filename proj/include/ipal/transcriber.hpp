#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ipal/capture/packet.hpp"
#include "ipal/message.hpp"
#include "ipal/modbus/dissector.hpp"
#include "ipal/scenario.hpp"

namespace ipal {

/// A protocol dissector turns TCP segments into IPAL messages. New protocols
/// register a factory under their name.
class ProtocolDissector {
 public:
  virtual ~ProtocolDissector() = default;
  virtual std::string_view protocol() const = 0;
  virtual void feed(Timestamp t, const capture::TcpSegment& seg, std::uint64_t& next_id,
                    std::vector<IpalMessage>& out) = 0;
};

struct TranscribeConfig {
  std::string protocol = "modbus";
  modbus::DissectorConfig modbus;
  /// Attack intervals used to label messages; unlabeled when absent.
  std::optional<std::vector<Scenario>> labels;
};

using DissectorFactory = std::function<std::unique_ptr<ProtocolDissector>(const TranscribeConfig&)>;

void register_dissector(const std::string& name, DissectorFactory factory);
std::unique_ptr<ProtocolDissector> make_dissector(const TranscribeConfig& cfg);
std::vector<std::string> registered_protocols();

struct TranscribeSummary {
  std::size_t frames_read = 0;
  std::size_t frames_transcribed = 0;  // frames that completed at least one message
  std::size_t frames_skipped = 0;
  std::size_t messages = 0;

  bool operator==(const TranscribeSummary&) const = default;
};

using MessageSink = std::function<void(const IpalMessage&)>;

/// Streams a capture through the configured dissector. Memory stays bounded
/// by the reassembly buffers and the correlation window.
TranscribeSummary transcribe(const std::filesystem::path& capture, const TranscribeConfig& cfg,
                             const MessageSink& sink);

}  // namespace ipal
