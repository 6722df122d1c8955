#include "fixtures.hpp"

#include <atomic>
#include <chrono>
#include <cmath>

#include <unistd.h>

#include <fmt/format.h>

namespace ipal::test {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  lab::Rng rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
  path_ = fs::temp_directory_path() / fmt::format("{}-{}-{}-{:x}", tag, ::getpid(), counter++, rng.bits() & 0xffffff);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Timestamp at(double seconds) { return timestamp_from_seconds(seconds); }

namespace {

std::string random_text(lab::Rng& rng, std::size_t max_len) {
  static constexpr std::string_view alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-:./\"\\\t";
  const auto n = rng.below(max_len + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

Value random_value(lab::Rng& rng) {
  switch (rng.below(4)) {
    case 0: return rng.uniform() < 0.5;
    case 1: return static_cast<std::int64_t>(rng.bits()) >> rng.below(63);
    case 2: {
      // Mix of plain, tiny, huge and integral doubles.
      const double scale = std::pow(10.0, rng.uniform(-12.0, 12.0));
      double x = (rng.uniform() - 0.5) * scale;
      if (rng.below(5) == 0) x = std::round(x);
      return x;
    }
    default: return random_text(rng, 12);
  }
}

}  // namespace

IpalMessage random_message(lab::Rng& rng, std::uint64_t id, Timestamp t) {
  IpalMessage m;
  m.id = id;
  m.timestamp = t;
  m.protocol = rng.below(4) == 0 ? "s7" : "modbus";
  m.length = 8 + rng.below(250);
  m.malicious = static_cast<Label>(rng.below(3));
  m.source = fmt::format("10.0.{}.{}:{}:{}", rng.below(4), rng.below(255), 49152 + rng.below(100), rng.below(8));
  m.destination = fmt::format("10.0.0.{}:502:{}", rng.below(8), rng.below(8));
  if (rng.below(3) == 0)
    m.type = random_text(rng, 8);
  else
    m.type = static_cast<std::int64_t>(rng.below(256));
  m.activity = static_cast<Activity>(rng.below(4));
  if (is_answer(m.activity) && id > 0) {
    m.responds_to.push_back(rng.below(id));
    if (rng.below(8) == 0) m.responds_to.push_back(rng.below(id));
  }
  const auto n = rng.below(6);
  for (std::size_t i = 0; i < n; ++i) m.process_data.insert_or_assign(random_text(rng, 10), random_value(rng));
  if (rng.below(10) == 0) m.extra["flow_id"] = rng.below(1000);
  return m;
}

std::vector<IpalMessage> random_stream(lab::Rng& rng, std::size_t n, bool with_values) {
  std::vector<IpalMessage> out;
  out.reserve(n);
  auto t = at(1600000000.0 + rng.uniform(0, 1000));
  for (std::size_t i = 0; i < n; ++i) {
    t += Duration{static_cast<std::int64_t>(rng.below(2'000'000))};
    auto m = random_message(rng, i, t);
    if (!with_values) m.process_data.clear();
    out.push_back(std::move(m));
  }
  return out;
}

IpalMessage msg(std::uint64_t id, double t, std::int64_t type, Activity act, const std::string& src,
                const std::string& dst) {
  IpalMessage m;
  m.id = id;
  m.timestamp = at(t);
  m.protocol = "modbus";
  m.length = 12;
  m.malicious = Label::benign;
  m.source = src;
  m.destination = dst;
  m.type = type;
  m.activity = act;
  return m;
}

StateMessage state(double t, ProcessData data, Label label) {
  StateMessage s;
  s.timestamp = at(t);
  s.state = std::move(data);
  s.malicious = label;
  return s;
}

lab::ScenarioSpec periodic_spec(double duration, double period, double jitter, std::uint64_t seed) {
  lab::ScenarioSpec spec;
  spec.start = 1600000000.0;
  spec.duration = duration;
  spec.seed = seed;
  lab::ConnectionSpec c;
  c.period = period;
  c.jitter = jitter;
  c.latency = 0.005;
  lab::PolledMessage pm;
  pm.function_code = 3;
  lab::VariableSpec v;
  v.name = "level";
  v.value = 42.5;
  v.decimals = 2;
  pm.variables.push_back(v);
  c.messages.push_back(pm);
  spec.connections.push_back(c);
  return spec;
}

fs::path data_dir() { return fs::path(IPAL_TEST_DATA_DIR) / "data"; }

lab::ScenarioSpec shipped_spec() { return lab::ScenarioSpec::load(data_dir() / "scenario.json"); }

std::size_t count_malicious(const std::vector<IpalMessage>& msgs) {
  std::size_t n = 0;
  for (const auto& m : msgs) n += m.malicious == Label::malicious;
  return n;
}

}  // namespace ipal::test
