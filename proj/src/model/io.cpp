#include "ipal/io.hpp"

#include <sstream>

#include <fmt/format.h>

#include "ipal/codec.hpp"
#include "ipal/error.hpp"

namespace ipal {

namespace {

template <typename Record>
Record parse_record(std::string_view line);

template <>
IpalMessage parse_record<IpalMessage>(std::string_view line) { return parse_message(line); }
template <>
StateMessage parse_record<StateMessage>(std::string_view line) { return parse_state(line); }
template <>
AlertEvent parse_record<AlertEvent>(std::string_view line) { return parse_alert(line); }

std::string serialize_record(const IpalMessage& m) { return serialize_message(m); }
std::string serialize_record(const StateMessage& s) { return serialize_state(s); }
std::string serialize_record(const AlertEvent& a) { return serialize_alert(a); }

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace

template <typename Record>
RecordReader<Record>::RecordReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
  if (!in_) throw DataError(fmt::format("cannot open {}", path_));
}

template <typename Record>
std::optional<Record> RecordReader<Record>::next() {
  while (std::getline(in_, buffer_)) {
    ++line_no_;
    if (blank(buffer_)) continue;
    try {
      return parse_record<Record>(buffer_);
    } catch (const ValidationError& e) {
      throw ValidationError(e.rule(), fmt::format("{}:{}: {}", path_, line_no_, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", path_, line_no_, e.what()));
    }
  }
  return std::nullopt;
}

template <typename Record>
RecordWriter<Record>::RecordWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw DataError(fmt::format("cannot write {}", path.string()));
}

template <typename Record>
void RecordWriter<Record>::write(const Record& r) {
  out_ << serialize_record(r) << '\n';
}

template class RecordReader<IpalMessage>;
template class RecordReader<StateMessage>;
template class RecordReader<AlertEvent>;
template class RecordWriter<IpalMessage>;
template class RecordWriter<StateMessage>;
template class RecordWriter<AlertEvent>;

namespace {

template <typename Record>
std::vector<Record> read_all(const std::filesystem::path& path) {
  RecordReader<Record> reader(path);
  std::vector<Record> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

template <typename Record>
void write_all(const std::filesystem::path& path, std::span<const Record> records) {
  RecordWriter<Record> writer(path);
  for (const auto& r : records) writer.write(r);
}

}  // namespace

std::vector<IpalMessage> read_messages(const std::filesystem::path& path) { return read_all<IpalMessage>(path); }
std::vector<StateMessage> read_states(const std::filesystem::path& path) { return read_all<StateMessage>(path); }
std::vector<AlertEvent> read_alerts(const std::filesystem::path& path) { return read_all<AlertEvent>(path); }

void write_messages(const std::filesystem::path& path, std::span<const IpalMessage> msgs) { write_all(path, msgs); }
void write_states(const std::filesystem::path& path, std::span<const StateMessage> states) { write_all(path, states); }
void write_alerts(const std::filesystem::path& path, std::span<const AlertEvent> alerts) { write_all(path, alerts); }

StreamKind sniff_stream_kind(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ipal") return StreamKind::messages;
  if (ext == ".state") return StreamKind::states;

  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("state")) return StreamKind::states;
      if (j.contains("activity")) return StreamKind::messages;
    } catch (const nlohmann::json::exception&) {
    }
    break;
  }
  throw DataError(fmt::format("cannot tell whether {} holds messages or states", path.string()));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace ipal
