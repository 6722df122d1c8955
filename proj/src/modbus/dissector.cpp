#include "ipal/modbus/dissector.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ipal/error.hpp"

namespace ipal::modbus {

namespace {

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::vector<std::uint16_t> read_registers(std::span<const std::uint8_t> b, std::size_t off, std::size_t count) {
  std::vector<std::uint16_t> regs(count);
  for (std::size_t i = 0; i < count; ++i) regs[i] = be16(b, off + 2 * i);
  return regs;
}

std::vector<bool> read_bits(std::span<const std::uint8_t> b, std::size_t off, std::size_t count) {
  std::vector<bool> bits(count);
  for (std::size_t i = 0; i < count; ++i) bits[i] = (b[off + i / 8] >> (i % 8)) & 1u;
  return bits;
}

std::optional<Table> read_table(std::uint8_t fc) {
  switch (fc) {
    case 1: return Table::coil;
    case 2: return Table::discrete_input;
    case 3: return Table::holding_register;
    case 4: return Table::input_register;
    case 23: return Table::holding_register;
    default: return std::nullopt;
  }
}

std::string with_unit(const std::string& endpoint, std::uint8_t unit) { return fmt::format("{}:{}", endpoint, unit); }

void put_bits(const RuleSet& rules, const std::string& server, Table table, std::uint16_t start,
              const std::vector<bool>& bits, ProcessData& out) {
  rules.interpret_bits(server, table, start, bits, out);
}

// Fills request-side data. Returns false for a malformed PDU.
bool decode_request(std::span<const std::uint8_t> pdu, const std::string& server, const DissectorConfig& cfg,
                    RequestContext& ctx, ProcessData& data, std::string& why) {
  const std::uint8_t fc = pdu[0];
  ctx.function_code = fc;
  const auto body = pdu.subspan(1);
  auto need = [&](std::size_t n) {
    if (body.size() >= n) return true;
    why = fmt::format("function {} request needs {} bytes, has {}", fc, n, body.size());
    return false;
  };

  switch (fc) {
    case 1:
    case 2:
    case 3:
    case 4: {
      if (!need(4)) return false;
      ctx.table = *read_table(fc);
      ctx.start = be16(body, 0);
      ctx.quantity = be16(body, 2);
      if (ctx.quantity == 0) {
        why = "read of zero items";
        return false;
      }
      return true;
    }
    case 5: {
      if (!need(4)) return false;
      const auto v = be16(body, 2);
      if (v != 0xff00 && v != 0x0000) {
        why = fmt::format("coil value {:#06x}", v);
        return false;
      }
      ctx.table = Table::coil;
      ctx.start = be16(body, 0);
      ctx.quantity = 1;
      put_bits(cfg.rules, server, Table::coil, ctx.start, {v == 0xff00}, data);
      return true;
    }
    case 6: {
      if (!need(4)) return false;
      ctx.start = be16(body, 0);
      ctx.quantity = 1;
      const std::uint16_t reg = be16(body, 2);
      cfg.rules.interpret_registers(server, Table::holding_register, ctx.start, std::span(&reg, 1), data);
      return true;
    }
    case 15: {
      if (!need(5)) return false;
      ctx.table = Table::coil;
      ctx.start = be16(body, 0);
      ctx.quantity = be16(body, 2);
      const std::size_t bc = body[4];
      if (ctx.quantity == 0 || bc != (ctx.quantity + 7u) / 8u || !need(5 + bc)) {
        if (why.empty()) why = "coil byte count does not match quantity";
        return false;
      }
      put_bits(cfg.rules, server, Table::coil, ctx.start, read_bits(body, 5, ctx.quantity), data);
      return true;
    }
    case 16: {
      if (!need(5)) return false;
      ctx.start = be16(body, 0);
      ctx.quantity = be16(body, 2);
      const std::size_t bc = body[4];
      if (ctx.quantity == 0 || bc != 2u * ctx.quantity || !need(5 + bc)) {
        if (why.empty()) why = "register byte count does not match quantity";
        return false;
      }
      const auto regs = read_registers(body, 5, ctx.quantity);
      cfg.rules.interpret_registers(server, Table::holding_register, ctx.start, regs, data);
      return true;
    }
    case 22:
      if (!need(6)) return false;
      ctx.start = be16(body, 0);
      ctx.quantity = 1;
      return true;
    case 23: {
      if (!need(9)) return false;
      ctx.start = be16(body, 0);
      ctx.quantity = be16(body, 2);
      const std::uint16_t wstart = be16(body, 4);
      const std::uint16_t wqty = be16(body, 6);
      const std::size_t bc = body[8];
      if (ctx.quantity == 0 || wqty == 0 || bc != 2u * wqty || !need(9 + bc)) {
        if (why.empty()) why = "read/write multiple byte count does not match quantity";
        return false;
      }
      cfg.rules.interpret_registers(server, Table::holding_register, wstart, read_registers(body, 9, wqty), data);
      return true;
    }
    default:
      return true;
  }
}

}  // namespace

ActivityMap ActivityMap::defaults() {
  ActivityMap m;
  for (std::uint8_t fc : {1, 2, 3, 4, 20, 23, 24}) m.classes_[fc] = FunctionClass::read;
  for (std::uint8_t fc : {5, 6, 15, 16, 21, 22}) m.classes_[fc] = FunctionClass::write;
  for (std::uint8_t fc : {7, 8, 11, 12, 17, 43}) m.classes_[fc] = FunctionClass::skip;
  return m;
}

ActivityMap ActivityMap::from_json(const nlohmann::json& j) {
  auto m = defaults();
  auto apply = [&](const char* key, FunctionClass c) {
    if (!j.contains(key)) return;
    for (const auto& fc : j.at(key)) {
      const auto v = fc.get<int>();
      if (v < 1 || v > 127) throw ParseError(fmt::format("function code {} out of range", v));
      m.set(static_cast<std::uint8_t>(v), c);
    }
  };
  try {
    apply("read", FunctionClass::read);
    apply("write", FunctionClass::write);
    apply("skip", FunctionClass::skip);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad activity map: {}", e.what()));
  }
  return m;
}

FunctionClass ActivityMap::classify(std::uint8_t function_code) const {
  auto it = classes_.find(function_code & 0x7f);
  return it == classes_.end() ? FunctionClass::read : it->second;
}

std::optional<MbapFrame> parse_mbap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMbapHeaderSize) return std::nullopt;
  MbapFrame f;
  f.transaction = be16(bytes, 0);
  f.protocol = be16(bytes, 2);
  f.length = be16(bytes, 4);
  if (f.protocol != 0) throw ParseError(fmt::format("MBAP protocol id {} is not Modbus", f.protocol));
  if (f.length < 2 || f.length > 254) throw ParseError(fmt::format("MBAP length {} out of range", f.length));
  if (bytes.size() < f.wire_size()) return std::nullopt;
  f.unit = bytes[6];
  f.pdu = bytes.subspan(kMbapHeaderSize, f.length - 1u);
  return f;
}

void CorrelationTable::add_request(const Connection& conn, Key key, const RequestContext& ctx) {
  evict(ctx.timestamp);
  pending_[conn][key] = ctx;
  order_.emplace_back(ctx.timestamp, conn, key);
}

std::optional<RequestContext> CorrelationTable::take(const Connection& conn, Key key, Timestamp now) {
  evict(now);
  auto c = pending_.find(conn);
  if (c == pending_.end()) return std::nullopt;
  auto e = c->second.find(key);
  if (e == c->second.end()) return std::nullopt;
  auto ctx = e->second;
  c->second.erase(e);
  if (c->second.empty()) pending_.erase(c);
  return ctx;
}

std::size_t CorrelationTable::outstanding() const {
  std::size_t n = 0;
  for (const auto& [_, m] : pending_) n += m.size();
  return n;
}

void CorrelationTable::evict(Timestamp now) {
  while (!order_.empty() && now - std::get<0>(order_.front()) > window_) {
    const auto& [ts, conn, key] = order_.front();
    if (auto c = pending_.find(conn); c != pending_.end()) {
      if (auto e = c->second.find(key); e != c->second.end() && e->second.timestamp == ts) {
        c->second.erase(e);
        if (c->second.empty()) pending_.erase(c);
      }
    }
    order_.pop_front();
  }
}

std::optional<RequestContext> correlate(IpalMessage& msg, const CorrelationTable::Connection& conn,
                                        CorrelationTable::Key key, CorrelationTable& table) {
  if (!is_answer(msg.activity)) return std::nullopt;
  msg.responds_to.clear();
  auto ctx = table.take(conn, key, msg.timestamp);
  if (!ctx) return std::nullopt;
  if (const auto* fc = std::get_if<std::int64_t>(&msg.type); fc && (*fc & 0x7f) != ctx->function_code)
    return std::nullopt;
  msg.responds_to.push_back(ctx->request_id);
  return ctx;
}

std::optional<PduDecode> dissect_frame(const MbapFrame& frame, bool to_server, const Endpoints& ends,
                                       const DissectorConfig& cfg, std::string* diagnostic) {
  std::string why;
  auto fail = [&](std::string reason) -> std::optional<PduDecode> {
    if (diagnostic) *diagnostic = std::move(reason);
    return std::nullopt;
  };
  if (frame.pdu.empty()) return fail("empty PDU");

  const std::uint8_t fc = frame.pdu[0];
  const bool exception = fc & 0x80;
  const auto cls = cfg.activities.classify(fc);
  if (cls == FunctionClass::skip) return fail(fmt::format("function {} is not process traffic", fc & 0x7f));

  PduDecode out;
  auto& m = out.message;
  m.protocol = "modbus";
  m.length = frame.wire_size();
  m.type = static_cast<std::int64_t>(fc);
  const auto client = with_unit(ends.client, frame.unit);
  const auto server = with_unit(ends.server, frame.unit);
  m.source = to_server ? client : server;
  m.destination = to_server ? server : client;

  if (to_server) {
    if (exception) return fail(fmt::format("exception code {} sent towards the server", fc));
    m.activity = cls == FunctionClass::read ? Activity::request : Activity::command;
    RequestContext ctx;
    if (!decode_request(frame.pdu, server, cfg, ctx, m.process_data, why)) return fail(why);
    out.request_info = ctx;
  } else {
    m.activity = cls == FunctionClass::read ? Activity::response : Activity::command_response;
    if (exception && frame.pdu.size() < 2) return fail("exception response without exception code");
  }
  return out;
}

bool fill_response_data(const MbapFrame& frame, const RequestContext& request, const Endpoints& ends,
                        const DissectorConfig& cfg, ProcessData& out) {
  const auto pdu = frame.pdu;
  const std::uint8_t fc = pdu[0];
  if (fc & 0x80) return true;
  if (cfg.activities.classify(fc) != FunctionClass::read) return true;
  const auto server = with_unit(ends.server, frame.unit);
  const auto body = pdu.subspan(1);

  switch (fc) {
    case 1:
    case 2: {
      if (body.empty()) return false;
      const std::size_t bc = body[0];
      if (bc < (request.quantity + 7u) / 8u || body.size() < 1 + bc) return false;
      put_bits(cfg.rules, server, request.table, request.start, read_bits(body, 1, request.quantity), out);
      return true;
    }
    case 3:
    case 4:
    case 23: {
      if (body.empty()) return false;
      const std::size_t bc = body[0];
      if (bc != 2u * request.quantity || body.size() < 1 + bc) return false;
      cfg.rules.interpret_registers(server, request.table, request.start, read_registers(body, 1, request.quantity),
                                    out);
      return true;
    }
    default:
      return true;
  }
}

ModbusDissector::ModbusDissector(DissectorConfig cfg) : cfg_(std::move(cfg)), table_(cfg_.correlation_window) {}

void ModbusDissector::feed(Timestamp t, const capture::TcpSegment& seg, std::uint64_t& next_id,
                           std::vector<IpalMessage>& out) {
  const bool to_server = seg.dst_port == cfg_.port;
  if (!to_server && seg.src_port != cfg_.port) return;
  ++stats_.frames_seen;

  const auto src = fmt::format("{}:{}", capture::to_string(seg.src), seg.src_port);
  const auto dst = fmt::format("{}:{}", capture::to_string(seg.dst), seg.dst_port);
  auto& flow = flows_[src + ">" + dst];

  if (seg.payload.empty()) {
    if (seg.flags & capture::tcp_flag::syn) {
      flow.buffer.clear();
      flow.next_seq = seg.seq + 1;
      flow.synced = true;
    }
    return;
  }

  if (!flow.synced) {
    flow.next_seq = seg.seq;
    flow.synced = true;
  }

  const auto delta = static_cast<std::int32_t>(seg.seq - flow.next_seq);
  if (delta > 0) {
    spdlog::debug("modbus: {} bytes missing in {} > {}, dropping partial data", delta, src, dst);
    flow.buffer.clear();
    flow.buffer.insert(flow.buffer.end(), seg.payload.begin(), seg.payload.end());
  } else {
    const auto overlap = static_cast<std::size_t>(-delta);
    if (overlap >= seg.payload.size()) return;  // pure retransmission
    flow.buffer.insert(flow.buffer.end(), seg.payload.begin() + static_cast<std::ptrdiff_t>(overlap),
                       seg.payload.end());
  }
  flow.next_seq = seg.seq + static_cast<std::uint32_t>(seg.payload.size());

  const Endpoints ends = to_server ? Endpoints{src, dst} : Endpoints{dst, src};
  const auto conn = ends.client + "|" + ends.server;

  std::size_t consumed = 0;
  while (true) {
    std::optional<MbapFrame> frame;
    try {
      frame = parse_mbap(std::span(flow.buffer).subspan(consumed));
    } catch (const ParseError& e) {
      ++stats_.malformed;
      spdlog::warn("modbus: {} > {} at {}: {}; discarding buffered bytes", src, dst, format_seconds(t), e.what());
      consumed = flow.buffer.size();
      break;
    }
    if (!frame) break;
    consumed += frame->wire_size();
    ++stats_.pdus;

    std::string why;
    auto decoded = dissect_frame(*frame, to_server, ends, cfg_, &why);
    if (!decoded) {
      const bool skipped_fc = !frame->pdu.empty() && cfg_.activities.classify(frame->pdu[0]) == FunctionClass::skip;
      if (skipped_fc) {
        ++stats_.skipped_functions;
      } else {
        ++stats_.malformed;
        spdlog::warn("modbus: {} > {} at {}: {}", src, dst, format_seconds(t), why);
      }
      continue;
    }

    auto& m = decoded->message;
    m.timestamp = t;
    m.id = next_id;
    const CorrelationTable::Key key{frame->transaction, frame->unit};
    if (to_server) {
      auto ctx = *decoded->request_info;
      ctx.request_id = m.id;
      ctx.timestamp = t;
      table_.add_request(conn, key, ctx);
    } else if (auto req = correlate(m, conn, key, table_)) {
      if (!fill_response_data(*frame, *req, ends, cfg_, m.process_data)) {
        ++stats_.malformed;
        spdlog::warn("modbus: {} > {} at {}: response does not fit request {}", src, dst, format_seconds(t),
                     req->request_id);
        continue;
      }
    }
    ++next_id;
    out.push_back(std::move(m));
  }
  flow.buffer.erase(flow.buffer.begin(), flow.buffer.begin() + static_cast<std::ptrdiff_t>(consumed));
}

}  // namespace ipal::modbus
