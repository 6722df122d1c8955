#include "ipal/transcriber.hpp"

#include <map>
#include <mutex>

#include <fmt/format.h>

#include "ipal/capture/pcap.hpp"
#include "ipal/error.hpp"

namespace ipal {

namespace {

class ModbusTcpDissector final : public ProtocolDissector {
 public:
  explicit ModbusTcpDissector(const TranscribeConfig& cfg) : impl_(cfg.modbus) {}

  std::string_view protocol() const override { return "modbus"; }

  void feed(Timestamp t, const capture::TcpSegment& seg, std::uint64_t& next_id,
            std::vector<IpalMessage>& out) override {
    impl_.feed(t, seg, next_id, out);
  }

 private:
  modbus::ModbusDissector impl_;
};

struct Registry {
  std::mutex mu;
  std::map<std::string, DissectorFactory> factories{
      {"modbus", [](const TranscribeConfig& c) { return std::make_unique<ModbusTcpDissector>(c); }}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_dissector(const std::string& name, DissectorFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<ProtocolDissector> make_dissector(const TranscribeConfig& cfg) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.factories.find(cfg.protocol);
  if (it == r.factories.end()) throw UsageError(fmt::format("no dissector for protocol \"{}\"", cfg.protocol));
  return it->second(cfg);
}

std::vector<std::string> registered_protocols() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> out;
  for (const auto& [name, _] : r.factories) out.push_back(name);
  return out;
}

TranscribeSummary transcribe(const std::filesystem::path& capture, const TranscribeConfig& cfg,
                             const MessageSink& sink) {
  auto dissector = make_dissector(cfg);
  std::vector<Scenario> labels;
  if (cfg.labels) {
    labels = *cfg.labels;
    normalize_scenarios(labels);
  }

  capture::PcapReader reader(capture);
  TranscribeSummary summary;
  std::uint64_t next_id = 0;
  std::vector<IpalMessage> batch;

  while (auto frame = reader.next()) {
    ++summary.frames_read;
    batch.clear();
    if (auto seg = capture::decode_tcp(reader.link_type(), frame->data))
      dissector->feed(frame->timestamp, *seg, next_id, batch);

    if (batch.empty()) {
      ++summary.frames_skipped;
      continue;
    }
    ++summary.frames_transcribed;
    for (auto& m : batch) {
      if (cfg.labels) m.malicious = label_for(labels, m.timestamp);
      sink(m);
      ++summary.messages;
    }
  }
  return summary;
}

}  // namespace ipal
