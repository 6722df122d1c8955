#include "ipal/lab/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "ipal/capture/packet.hpp"
#include "ipal/capture/pcap.hpp"
#include "ipal/error.hpp"
#include "ipal/io.hpp"
#include "ipal/lab/rng.hpp"

namespace ipal::lab {

namespace {

bool is_read(int fc) { return fc >= 1 && fc <= 4; }
bool is_bit_fc(int fc) { return fc == 1 || fc == 2 || fc == 5 || fc == 15; }

modbus::Table table_of(int fc) {
  switch (fc) {
    case 1:
    case 5:
    case 15: return modbus::Table::coil;
    case 2: return modbus::Table::discrete_input;
    case 4: return modbus::Table::input_register;
    default: return modbus::Table::holding_register;
  }
}

int registers_of(const VariableSpec& v) { return v.type == VariableType::real ? 2 : 1; }

int items_of(const PolledMessage& pm) {
  if (is_bit_fc(pm.function_code)) return static_cast<int>(pm.variables.size());
  int n = 0;
  for (const auto& v : pm.variables) n += registers_of(v);
  return n;
}

ValueProcess parse_process(const std::string& s) {
  if (s == "constant") return ValueProcess::constant;
  if (s == "sine") return ValueProcess::sine;
  if (s == "random-walk" || s == "random_walk") return ValueProcess::random_walk;
  throw ParseError(fmt::format("unknown value process \"{}\"", s));
}

VariableType parse_type(const std::string& s) {
  if (s == "real" || s == "float") return VariableType::real;
  if (s == "int" || s == "integer") return VariableType::integer;
  if (s == "bool" || s == "boolean") return VariableType::boolean;
  throw ParseError(fmt::format("unknown variable type \"{}\"", s));
}

Value make_value(const VariableSpec& v, double x) {
  switch (v.type) {
    case VariableType::boolean: return x >= 0.5;
    case VariableType::integer:
      return static_cast<std::int64_t>(std::clamp<double>(std::llround(x), -32768.0, 32767.0));
    case VariableType::real: {
      const double p = std::pow(10.0, v.decimals);
      return static_cast<double>(static_cast<float>(std::round(x * p) / p));
    }
  }
  return x;
}

struct Located {
  const ConnectionSpec* conn = nullptr;
  const PolledMessage* poll = nullptr;
};

Located locate(const ScenarioSpec& spec, const IpalMessage& m) {
  for (std::size_t i = 0; i < spec.connections.size(); ++i) {
    const auto& c = spec.connections[i];
    const auto client = fmt::format("{}:{}", c.client_endpoint(i), c.unit);
    const auto server = fmt::format("{}:{}", c.server_endpoint(), c.unit);
    const bool fwd = m.source == client && m.destination == server;
    const bool back = m.source == server && m.destination == client;
    if (!fwd && !back) continue;
    const auto* fc = std::get_if<std::int64_t>(&m.type);
    if (!fc) continue;
    for (const auto& pm : c.messages)
      if (pm.function_code == (*fc & 0x7f)) return {&c, &pm};
  }
  throw DataError(fmt::format("message {} does not belong to any connection of the scenario", m.id));
}

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void append_registers(std::vector<std::uint8_t>& b, const PolledMessage& pm, const ProcessData& data) {
  for (const auto& v : pm.variables) {
    auto it = data.find(v.name);
    const Value val = it == data.end() ? Value{std::int64_t{0}} : it->second;
    if (v.type == VariableType::real) {
      const float f = static_cast<float>(as_number(val).value_or(0.0));
      const auto raw = std::bit_cast<std::uint32_t>(f);
      put16(b, static_cast<std::uint16_t>(raw >> 16));
      put16(b, static_cast<std::uint16_t>(raw & 0xffff));
    } else {
      const auto x = static_cast<std::int64_t>(as_number(val).value_or(0.0));
      put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(x)));
    }
  }
}

std::vector<std::uint8_t> pack_bits(const PolledMessage& pm, const ProcessData& data) {
  std::vector<std::uint8_t> out((pm.variables.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < pm.variables.size(); ++i) {
    auto it = data.find(pm.variables[i].name);
    if (it != data.end() && as_number(it->second).value_or(0.0) != 0.0) out[i / 8] |= 1u << (i % 8);
  }
  return out;
}

}  // namespace

std::string ConnectionSpec::client_endpoint(std::size_t index) const {
  const auto port = client_port ? client_port : static_cast<std::uint16_t>(49152 + index);
  return fmt::format("{}:{}", client, port);
}

std::string ConnectionSpec::server_endpoint() const { return fmt::format("{}:{}", server, server_port); }

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  try {
    s.start = j.value("start", 0.0);
    s.duration = j.at("duration").get<double>();
    s.seed = j.value("seed", std::uint64_t{1});
    for (const auto& cj : j.at("connections")) {
      ConnectionSpec c;
      c.client = cj.value("client", c.client);
      c.server = cj.value("server", c.server);
      c.client_port = cj.value("client_port", std::uint16_t{0});
      c.server_port = cj.value("server_port", std::uint16_t{502});
      c.unit = cj.value("unit", std::uint8_t{1});
      c.period = cj.value("period", c.period);
      c.jitter = cj.value("jitter", c.jitter);
      c.latency = cj.value("latency", c.latency);
      c.offset = cj.value("offset", c.offset);
      c.spacing = cj.value("spacing", c.spacing);
      for (const auto& mj : cj.at("messages")) {
        PolledMessage pm;
        pm.function_code = mj.value("function_code", 3);
        pm.address = mj.value("address", std::uint16_t{0});
        for (const auto& vj : mj.value("variables", nlohmann::json::array())) {
          VariableSpec v;
          v.name = vj.at("name").get<std::string>();
          v.type = parse_type(vj.value("type", std::string{is_bit_fc(pm.function_code) ? "bool" : "real"}));
          v.process = parse_process(vj.value("process", std::string{"constant"}));
          v.value = vj.value("value", 0.0);
          v.amplitude = vj.value("amplitude", 1.0);
          v.period = vj.value("period", 10.0);
          v.step = vj.value("step", 0.1);
          v.decimals = vj.value("decimals", 3);
          pm.variables.push_back(std::move(v));
        }
        c.messages.push_back(std::move(pm));
      }
      s.connections.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad scenario spec: {}", e.what()));
  }
  s.validate();
  return s;
}

ScenarioSpec ScenarioSpec::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void ScenarioSpec::validate() const {
  if (!(duration > 0)) throw ValidationError("duration", "scenario duration must be positive");
  if (connections.empty()) throw ValidationError("connections", "scenario has no connections");
  for (const auto& c : connections) {
    if (!(c.period > 0)) throw ValidationError("polling period", "polling period must be positive");
    if (c.jitter < 0) throw ValidationError("jitter", "jitter must be non-negative");
    if (c.latency < 0 || c.spacing < 0) throw ValidationError("timing", "latency and spacing must be non-negative");
    if (c.messages.empty()) throw ValidationError("messages", "connection polls nothing");
    if (!capture::parse_ipv4(c.client) || !capture::parse_ipv4(c.server))
      throw ValidationError("address", "connection endpoints must be IPv4 addresses");
    for (const auto& pm : c.messages) {
      const int fc = pm.function_code;
      if (!(is_read(fc) || fc == 5 || fc == 6 || fc == 15 || fc == 16))
        throw ValidationError("function code", fmt::format("function {} cannot be generated", fc));
      if (pm.variables.empty()) throw ValidationError("variables", fmt::format("function {} carries no variables", fc));
      if ((fc == 5 || fc == 6) && (pm.variables.size() != 1 || pm.variables[0].type == VariableType::real))
        throw ValidationError("variables", "single writes take exactly one integer or boolean variable");
      if (!is_bit_fc(fc) && items_of(pm) > 120)
        throw ValidationError("variables", "too many registers for one PDU");
      for (const auto& v : pm.variables) {
        if (is_bit_fc(fc) != (v.type == VariableType::boolean))
          throw ValidationError("variables", fmt::format("variable \"{}\" does not fit function {}", v.name, fc));
        if (v.process == ValueProcess::sine && !(v.period > 0))
          throw ValidationError("variables", fmt::format("variable \"{}\": sine period must be positive", v.name));
      }
    }
  }
}

std::vector<std::uint8_t> encode_pdu(const ScenarioSpec& spec, const IpalMessage& m) {
  const auto [conn, pm] = locate(spec, m);
  const auto fc = static_cast<std::uint8_t>(pm->function_code);
  const auto qty = static_cast<std::uint16_t>(items_of(*pm));
  std::vector<std::uint8_t> b{fc};
  switch (m.activity) {
    case Activity::request:
      put16(b, pm->address);
      put16(b, qty);
      break;
    case Activity::response:
      if (is_bit_fc(fc)) {
        auto bits = pack_bits(*pm, m.process_data);
        b.push_back(static_cast<std::uint8_t>(bits.size()));
        b.insert(b.end(), bits.begin(), bits.end());
      } else {
        b.push_back(static_cast<std::uint8_t>(2 * qty));
        append_registers(b, *pm, m.process_data);
      }
      break;
    case Activity::command:
      put16(b, pm->address);
      if (fc == 5) {
        put16(b, pack_bits(*pm, m.process_data)[0] ? 0xff00 : 0x0000);
      } else if (fc == 6) {
        append_registers(b, *pm, m.process_data);
      } else if (fc == 15) {
        put16(b, qty);
        auto bits = pack_bits(*pm, m.process_data);
        b.push_back(static_cast<std::uint8_t>(bits.size()));
        b.insert(b.end(), bits.begin(), bits.end());
      } else {
        put16(b, qty);
        b.push_back(static_cast<std::uint8_t>(2 * qty));
        append_registers(b, *pm, m.process_data);
      }
      break;
    case Activity::command_response:
      put16(b, pm->address);
      if (fc == 5 || fc == 6) {
        // Echo of the written value is not carried in the answer's process data.
        put16(b, 0);
      } else {
        put16(b, qty);
      }
      break;
  }
  return b;
}

std::vector<IpalMessage> generate(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  struct Pending {
    IpalMessage msg;
    std::size_t order = 0;
    std::optional<std::size_t> answers;  // order index of the request
  };
  std::vector<Pending> pending;

  const auto start_us = duration_from_seconds(spec.start).count();
  const auto end_us = start_us + duration_from_seconds(spec.duration).count();

  for (std::size_t ci = 0; ci < spec.connections.size(); ++ci) {
    const auto& c = spec.connections[ci];
    const auto period_us = duration_from_seconds(c.period).count();
    const auto offset_us = duration_from_seconds(c.offset).count();
    const auto spacing_us = duration_from_seconds(c.spacing).count();
    const auto latency_us = duration_from_seconds(c.latency).count();
    const auto client = fmt::format("{}:{}", c.client_endpoint(ci), c.unit);
    const auto server = fmt::format("{}:{}", c.server_endpoint(), c.unit);

    std::map<std::string, double> walk;
    for (const auto& pm : c.messages)
      for (const auto& v : pm.variables) walk.emplace(v.name, v.value);

    for (std::int64_t k = 0;; ++k) {
      const auto nominal_rel = offset_us + k * period_us;
      const auto nominal = start_us + nominal_rel;
      if (nominal >= end_us) break;
      const auto jitter_us = std::llround(c.jitter * rng.normal() * 1e6);
      for (auto& [name, level] : walk) {
        const double draw = rng.normal();
        for (const auto& pm : c.messages)
          for (const auto& v : pm.variables)
            if (v.name == name && v.process == ValueProcess::random_walk) level += v.step * draw;
      }

      for (std::size_t j = 0; j < c.messages.size(); ++j) {
        const auto& pm = c.messages[j];
        ProcessData values;
        for (const auto& v : pm.variables) {
          double x = v.value;
          if (v.process == ValueProcess::sine) {
            const auto t_us = duration_from_seconds(v.period).count();
            const double phase = static_cast<double>(((k * period_us) % t_us + t_us) % t_us) / static_cast<double>(t_us);
            x = v.value + v.amplitude * std::sin(2.0 * std::numbers::pi * phase);
          } else if (v.process == ValueProcess::random_walk) {
            x = walk.at(v.name);
          }
          values.emplace(v.name, make_value(v, x));
        }

        const auto req_us = nominal + jitter_us + static_cast<std::int64_t>(j) * spacing_us;
        IpalMessage req;
        req.timestamp = Timestamp{Duration{req_us}};
        req.protocol = "modbus";
        req.malicious = Label::benign;
        req.source = client;
        req.destination = server;
        req.type = static_cast<std::int64_t>(pm.function_code);
        req.activity = is_read(pm.function_code) ? Activity::request : Activity::command;
        if (!is_read(pm.function_code)) req.process_data = values;

        IpalMessage ans = req;
        ans.timestamp = Timestamp{Duration{req_us + latency_us}};
        ans.source = server;
        ans.destination = client;
        ans.activity = is_read(pm.function_code) ? Activity::response : Activity::command_response;
        ans.process_data = is_read(pm.function_code) ? values : ProcessData{};

        req.length = 7 + encode_pdu(spec, req).size();
        ans.length = 7 + encode_pdu(spec, ans).size();

        const auto req_order = pending.size();
        pending.push_back({std::move(req), req_order, std::nullopt});
        pending.push_back({std::move(ans), req_order + 1, req_order});
      }
    }
  }

  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.msg.timestamp < b.msg.timestamp;
  });
  std::vector<std::uint64_t> id_of(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) id_of[pending[i].order] = i;

  std::vector<IpalMessage> out;
  out.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto& p = pending[i];
    p.msg.id = i;
    if (p.answers && id_of[*p.answers] < i) p.msg.responds_to = {id_of[*p.answers]};
    out.push_back(std::move(p.msg));
  }
  return out;
}

modbus::RuleSet rules_for(const ScenarioSpec& spec) {
  std::vector<modbus::InterpretationRule> rules;
  for (std::size_t ci = 0; ci < spec.connections.size(); ++ci) {
    const auto& c = spec.connections[ci];
    const auto server = fmt::format("{}:{}", c.server_endpoint(), c.unit);
    for (const auto& pm : c.messages) {
      std::uint32_t addr = pm.address;
      for (const auto& v : pm.variables) {
        modbus::InterpretationRule r;
        r.server = server;
        r.table = table_of(pm.function_code);
        r.address = static_cast<std::uint16_t>(addr);
        r.name = v.name;
        if (is_bit_fc(pm.function_code)) {
          r.decode = modbus::Decode::boolean;
          addr += 1;
        } else if (v.type == VariableType::real) {
          r.combine = 2;
          r.decode = modbus::Decode::float32;
          addr += 2;
        } else {
          r.decode = v.type == VariableType::boolean ? modbus::Decode::boolean : modbus::Decode::signed_int;
          addr += 1;
        }
        const bool duplicate = std::any_of(rules.begin(), rules.end(), [&](const auto& o) {
          return o.server == r.server && o.table == r.table && o.address == r.address && o.name == r.name &&
                 o.combine == r.combine && o.decode == r.decode;
        });
        if (!duplicate) rules.push_back(std::move(r));
      }
    }
  }
  return modbus::RuleSet(std::move(rules));
}

std::size_t export_pcap(const ScenarioSpec& spec, const std::vector<IpalMessage>& msgs,
                        const std::filesystem::path& path) {
  capture::PcapWriter writer(path);
  struct ConnState {
    std::uint32_t client_seq = 1000;
    std::uint32_t server_seq = 5000;
    std::uint16_t next_txn = 0;
  };
  std::map<std::string, ConnState> conns;
  std::map<std::uint64_t, std::uint16_t> txn_of;
  std::size_t frames = 0;

  auto split = [](const std::string& endpoint) {
    const auto a = endpoint.find(':');
    const auto b = endpoint.find(':', a + 1);
    return std::pair{*capture::parse_ipv4(endpoint.substr(0, a)),
                     static_cast<std::uint16_t>(std::stoul(endpoint.substr(a + 1, b - a - 1)))};
  };

  for (const auto& m : msgs) {
    const auto [conn, pm] = locate(spec, m);
    const bool to_server = m.activity == Activity::request || m.activity == Activity::command;
    const auto& client_ep = to_server ? m.source : m.destination;
    const auto& server_ep = to_server ? m.destination : m.source;
    const auto [cip, cport] = split(client_ep);
    const auto [sip, sport] = split(server_ep);

    auto [it, fresh] = conns.try_emplace(client_ep + "|" + server_ep);
    auto& st = it->second;
    if (fresh) {
      // Three-way handshake just ahead of the first message.
      const auto t0 = m.timestamp - Duration{3};
      capture::TcpFrameSpec syn{cip, sip, cport, sport, st.client_seq - 1, 0, capture::tcp_flag::syn};
      capture::TcpFrameSpec synack{sip, cip, sport, cport, st.server_seq - 1, st.client_seq,
                                   static_cast<std::uint8_t>(capture::tcp_flag::syn | capture::tcp_flag::ack)};
      capture::TcpFrameSpec ack{cip, sip, cport, sport, st.client_seq, st.server_seq, capture::tcp_flag::ack};
      writer.write(t0, capture::build_tcp_frame(syn, {}));
      writer.write(t0 + Duration{1}, capture::build_tcp_frame(synack, {}));
      writer.write(t0 + Duration{2}, capture::build_tcp_frame(ack, {}));
      frames += 3;
    }

    std::uint16_t txn;
    if (to_server) {
      txn = st.next_txn++;
      txn_of[m.id] = txn;
    } else if (!m.responds_to.empty() && txn_of.contains(m.responds_to.front())) {
      txn = txn_of[m.responds_to.front()];
    } else {
      txn = st.next_txn++;
    }

    const auto pdu = encode_pdu(spec, m);
    std::vector<std::uint8_t> adu;
    put16(adu, txn);
    put16(adu, 0);
    put16(adu, static_cast<std::uint16_t>(pdu.size() + 1));
    adu.push_back(conn->unit);
    adu.insert(adu.end(), pdu.begin(), pdu.end());

    capture::TcpFrameSpec seg;
    if (to_server) {
      seg = {cip, sip, cport, sport, st.client_seq, st.server_seq};
      st.client_seq += static_cast<std::uint32_t>(adu.size());
    } else {
      seg = {sip, cip, sport, cport, st.server_seq, st.client_seq};
      st.server_seq += static_cast<std::uint32_t>(adu.size());
    }
    writer.write(m.timestamp, capture::build_tcp_frame(seg, adu));
    ++frames;
  }
  writer.flush();
  return frames;
}

}  // namespace ipal::lab
