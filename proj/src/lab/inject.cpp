#include "ipal/lab/inject.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "ipal/error.hpp"
#include "ipal/lab/rng.hpp"

namespace ipal::lab {

namespace {

constexpr std::pair<AttackFamily, std::string_view> kFamilies[] = {
    {AttackFamily::flooding, "flooding"},     {AttackFamily::injection, "injection"},
    {AttackFamily::prediction, "prediction"}, {AttackFamily::copy, "copy"},
    {AttackFamily::remove, "remove"},         {AttackFamily::swap, "swap"},
    {AttackFamily::value_manipulation, "value-manipulation"},
};

struct Entry {
  IpalMessage msg;
  std::optional<std::uint64_t> carries;  // input id whose identity this entry keeps
  bool malicious = false;
};

bool to_server(const IpalMessage& m) { return m.activity == Activity::request || m.activity == Activity::command; }

// A different value of the same type, the `n`-th of a distinct sequence.
Value perturb(const Value& v, std::size_t n) {
  const auto k = static_cast<double>(n + 1);
  if (const auto* b = std::get_if<bool>(&v)) return !*b;
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    const auto step = std::max<std::int64_t>(1, std::llabs(*i) / 10);
    return *i + step * static_cast<std::int64_t>(n + 1);
  }
  if (const auto* d = std::get_if<double>(&v)) {
    const double step = std::max(1.0, std::fabs(*d) * 0.1);
    return static_cast<double>(static_cast<float>(*d + step * k));
  }
  return std::get<std::string>(v) + fmt::format("#{}", n + 1);
}

}  // namespace

std::string_view to_string(AttackFamily f) {
  for (const auto& [k, s] : kFamilies)
    if (k == f) return s;
  return "?";
}

std::optional<AttackFamily> parse_attack_family(std::string_view s) {
  for (const auto& [k, name] : kFamilies)
    if (name == s) return k;
  if (s == "value_manipulation") return AttackFamily::value_manipulation;
  return std::nullopt;
}

InjectionResult inject(const std::vector<IpalMessage>& stream, const AttackSpec& atk) {
  if (stream.empty()) throw DataError("cannot inject into an empty stream");
  for (std::size_t i = 1; i < stream.size(); ++i)
    if (stream[i].timestamp < stream[i - 1].timestamp)
      throw DataError(fmt::format("stream is not ordered at message {}", stream[i].id));

  const Timestamp first = stream.front().timestamp;
  const Timestamp last = stream.back().timestamp;
  const Timestamp ws = atk.window_start.value_or(first);
  const Timestamp we = atk.window_end.value_or(last);
  if (we < ws) throw ValidationError("attack window", "window end precedes its start");
  if (ws > last || we < first) throw ValidationError("attack window", "window lies outside the stream");

  const bool mutation = atk.family == AttackFamily::copy || atk.family == AttackFamily::remove ||
                        atk.family == AttackFamily::swap || atk.family == AttackFamily::prediction;
  if (mutation && !(atk.rate >= 0.0 && atk.rate <= 1.0))
    throw ValidationError("attack rate", fmt::format("rate {} outside [0, 1]", atk.rate));
  if (atk.family == AttackFamily::flooding && !(atk.rate > 0.0))
    throw ValidationError("attack rate", "flooding rate must be positive");
  if (atk.family == AttackFamily::injection && !(atk.injection_min >= 0 && atk.injection_min <= atk.injection_max &&
                                                 atk.injection_max <= 1))
    throw ValidationError("injection offsets", "need 0 <= injection_min <= injection_max <= 1");

  auto in_window = [&](const IpalMessage& m) { return ws <= m.timestamp && m.timestamp <= we; };

  // Connection under attack.
  const bool insertion = atk.family == AttackFamily::flooding || atk.family == AttackFamily::injection ||
                         atk.family == AttackFamily::prediction;
  std::string server;
  if (insertion && atk.target.empty()) {
    auto it = std::find_if(stream.begin(), stream.end(), to_server);
    if (it == stream.end()) throw DataError("stream has no client-to-server packets to imitate");
    server = it->destination;
  }
  auto targeted = [&](const IpalMessage& m) {
    if (!server.empty()) return m.destination == server || m.source == server;
    if (atk.target.empty()) return true;
    return m.source.find(atk.target) != std::string::npos || m.destination.find(atk.target) != std::string::npos;
  };
  if (!std::any_of(stream.begin(), stream.end(), targeted))
    throw DataError(fmt::format("target \"{}\" not present in the stream", atk.target));

  Rng rng(atk.seed);
  InjectionResult res;
  std::vector<Entry> out;
  out.reserve(stream.size());
  for (const auto& m : stream) out.push_back({m, m.id, false});

  std::vector<Entry> added;
  std::vector<bool> drop(stream.size(), false);

  auto forged = [](const IpalMessage& tmpl, Timestamp t) {
    IpalMessage m = tmpl;
    m.timestamp = t;
    m.responds_to.clear();
    return m;
  };

  switch (atk.family) {
    case AttackFamily::flooding: {
      std::vector<std::size_t> tmpl;
      for (std::size_t i = 0; i < stream.size(); ++i)
        if (targeted(stream[i]) && to_server(stream[i])) tmpl.push_back(i);
      if (tmpl.empty()) throw DataError("target has no client-to-server packets to flood");
      const auto step = duration_from_seconds(1.0 / atk.rate);
      if (step <= Duration::zero()) throw ValidationError("attack rate", "flooding rate too high for microsecond timing");
      std::size_t cur = 0;
      for (Timestamp t = ws; t <= we; t += step) {
        // Repeat the most recent legitimate request at the burst rate.
        while (cur + 1 < tmpl.size() && stream[tmpl[cur + 1]].timestamp <= t) ++cur;
        added.push_back({forged(stream[tmpl[cur]], t), std::nullopt, true});
      }
      break;
    }
    case AttackFamily::injection: {
      // Packets whose successor of the same class lies inside the window.
      std::unordered_map<std::string, std::size_t> prev;
      std::vector<std::pair<std::size_t, std::size_t>> gaps;
      for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto& m = stream[i];
        if (!targeted(m) || !to_server(m)) continue;
        const auto key = fmt::format("{}|{}|{}", m.source, m.destination, ipal::to_string(m.type));
        if (auto it = prev.find(key); it != prev.end() && in_window(stream[it->second]) && in_window(m))
          gaps.emplace_back(it->second, i);
        prev[key] = i;
      }
      if (gaps.empty()) throw DataError("attack window holds no schedule gap to inject into");
      const std::size_t n = atk.count.value_or(std::max<std::size_t>(
          1, static_cast<std::size_t>(to_seconds(we - ws) / 10.0)));
      for (std::size_t k = 0; k < n; ++k) {
        const auto& [a, b] = gaps[rng.below(gaps.size())];
        const double frac = rng.uniform(atk.injection_min, atk.injection_max);
        const auto t = stream[a].timestamp +
                       Duration{std::llround(static_cast<double>((stream[b].timestamp - stream[a].timestamp).count()) * frac)};
        added.push_back({forged(stream[a], t), std::nullopt, true});
      }
      break;
    }
    case AttackFamily::prediction: {
      std::size_t n = 0;
      for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto& m = stream[i];
        if (!targeted(m) || !in_window(m) || m.process_data.empty()) continue;
        const double u = rng.uniform();
        const double noise = rng.normal();
        if (u >= atk.rate) continue;
        // Replace the legitimate packet with a forged one on its slot.
        auto& e = out[i];
        for (auto& [name, v] : e.msg.process_data) v = perturb(v, n);
        ++n;
        e.msg.timestamp += Duration{std::llround(atk.prediction_jitter * noise * 1e6)};
        e.malicious = true;
        res.mutated_positions.push_back(i);
      }
      break;
    }
    case AttackFamily::copy: {
      for (std::size_t i = 0; i < stream.size(); ++i) {
        if (!targeted(stream[i]) || !in_window(stream[i])) continue;
        if (rng.uniform() >= atk.rate) continue;
        added.push_back({stream[i], std::nullopt, true});
        res.mutated_positions.push_back(i);
      }
      break;
    }
    case AttackFamily::remove: {
      for (std::size_t i = 0; i < stream.size(); ++i) {
        if (!targeted(stream[i]) || !in_window(stream[i])) continue;
        if (rng.uniform() >= atk.rate) continue;
        drop[i] = true;
        res.gaps.push_back(stream[i].timestamp);
        res.mutated_positions.push_back(i);
      }
      break;
    }
    case AttackFamily::swap: {
      std::vector<bool> used(stream.size(), false);
      for (std::size_t i = 0; i < stream.size(); ++i) {
        if (!targeted(stream[i]) || !in_window(stream[i])) continue;
        const double u = rng.uniform();
        if (used[i] || u >= atk.rate) continue;
        std::size_t j = i + 1;
        while (j < stream.size() &&
               !(stream[j].source == stream[i].source && stream[j].destination == stream[i].destination))
          ++j;
        if (j == stream.size() || used[j] || !in_window(stream[j])) continue;
        used[i] = used[j] = true;
        // Contents trade places; timestamps stay with the slots.
        std::swap(out[i].msg, out[j].msg);
        std::swap(out[i].carries, out[j].carries);
        std::swap(out[i].msg.timestamp, out[j].msg.timestamp);
        out[i].malicious = out[j].malicious = true;
        res.mutated_positions.push_back(i);
        res.mutated_positions.push_back(j);
      }
      std::sort(res.mutated_positions.begin(), res.mutated_positions.end());
      break;
    }
    case AttackFamily::value_manipulation: {
      if (atk.variable.empty()) throw ValidationError("attack variable", "value manipulation needs a variable");
      if (!atk.value && atk.scale == 1.0 && atk.offset == 0.0)
        throw ValidationError("attack value", "value manipulation needs a value, scale or offset");
      bool seen = false;
      for (std::size_t i = 0; i < stream.size(); ++i) {
        auto it = out[i].msg.process_data.find(atk.variable);
        if (it == out[i].msg.process_data.end()) continue;
        seen = true;
        if (!targeted(stream[i]) || !in_window(stream[i])) continue;
        const auto x = as_number(it->second);
        if (!x) continue;
        const double y = atk.value.value_or(*x * atk.scale + atk.offset);
        if (std::holds_alternative<std::int64_t>(it->second))
          it->second = static_cast<std::int64_t>(std::llround(y));
        else if (std::holds_alternative<bool>(it->second))
          it->second = y != 0.0;
        else
          it->second = static_cast<double>(static_cast<float>(y));
        out[i].malicious = true;
        res.mutated_positions.push_back(i);
      }
      if (!seen) throw DataError(fmt::format("variable \"{}\" not present in the stream", atk.variable));
      break;
    }
  }

  // Merge: survivors and additions, stable by time (additions after
  // originals sharing their timestamp).
  std::vector<Entry> merged;
  merged.reserve(out.size() + added.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!drop[i]) merged.push_back(std::move(out[i]));
  res.removed = stream.size() - merged.size();
  const auto originals = merged.size();
  for (auto& e : added) merged.push_back(std::move(e));
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Entry& a, const Entry& b) { return a.msg.timestamp < b.msg.timestamp; });
  (void)originals;

  std::unordered_map<std::uint64_t, std::uint64_t> new_id;
  for (std::size_t i = 0; i < merged.size(); ++i)
    if (merged[i].carries) new_id.emplace(*merged[i].carries, i);

  res.stream.reserve(merged.size());
  std::optional<Timestamp> lo, hi;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    auto& e = merged[i];
    e.msg.id = i;
    std::vector<std::uint64_t> links;
    for (auto r : e.msg.responds_to)
      if (auto it = new_id.find(r); it != new_id.end() && it->second < i) links.push_back(it->second);
    e.msg.responds_to = std::move(links);
    if (e.malicious) {
      e.msg.malicious = Label::malicious;
      ++res.labeled;
      if (!lo) lo = e.msg.timestamp;
      hi = e.msg.timestamp;
    }
    res.stream.push_back(std::move(e.msg));
  }
  for (auto g : res.gaps) {
    lo = lo ? std::min(*lo, g) : g;
    hi = hi ? std::max(*hi, g) : g;
  }

  res.scenario.name = atk.name.empty() ? std::string(to_string(atk.family)) : atk.name;
  if (atk.window_start || atk.window_end) {
    res.scenario.start = ws;
    res.scenario.end = we;
    if (lo) res.scenario.start = std::min(ws, *lo);
    if (hi) res.scenario.end = std::max(we, *hi);
  } else {
    res.scenario.start = lo.value_or(first);
    res.scenario.end = hi.value_or(first);
  }
  return res;
}

}  // namespace ipal::lab
