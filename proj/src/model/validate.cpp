#include "ipal/validate.hpp"

#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "ipal/error.hpp"

namespace ipal {

namespace {

const char* check_local(const IpalMessage& m, std::string& detail) {
  if (m.source.empty()) {
    detail = "source is empty";
    return rule::source_empty;
  }
  for (auto r : m.responds_to) {
    if (r >= m.id) {
      detail = fmt::format("message {} responds to {}", m.id, r);
      return rule::responds_before;
    }
  }
  for (const auto& [name, v] : m.process_data) {
    if (const auto* d = std::get_if<double>(&v); d && !std::isfinite(*d)) {
      detail = fmt::format("variable \"{}\" is not finite", name);
      return rule::finite_value;
    }
  }
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) {
    static constexpr std::string_view known[] = {
        "id",          "timestamp",    "protocol", "length",      "malicious",   "source",
        "destination", "message_type", "activity", "responds_to", "process_data"};
    for (auto k : known) {
      if (it.key() == k) {
        detail = fmt::format("extra key \"{}\" shadows a message field", it.key());
        return "unique keys";
      }
    }
  }
  return nullptr;
}

}  // namespace

void validate_message(const IpalMessage& m) {
  std::string detail;
  if (const char* broken = check_local(m, detail)) throw ValidationError(broken, detail);
}

std::vector<Violation> validate_stream(std::span<const IpalMessage> msgs) {
  std::vector<Violation> out;
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(msgs.size());
  bool have_prev = false;
  std::uint64_t prev = 0;

  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const auto& m = msgs[i];
    if (have_prev && m.id <= prev)
      out.push_back({i, m.id, rule::id_monotonicity, fmt::format("id {} follows {}", m.id, prev)});
    if (!have_prev || m.id > prev) prev = m.id;
    have_prev = true;

    std::string detail;
    if (const char* broken = check_local(m, detail); broken && std::string_view(broken) != rule::responds_before)
      out.push_back({i, m.id, broken, detail});

    for (auto r : m.responds_to) {
      if (r >= m.id)
        out.push_back({i, m.id, rule::responds_before, fmt::format("responds to {}", r)});
      else if (!seen.contains(r))
        out.push_back({i, m.id, rule::dangling, fmt::format("responds to unseen id {}", r)});
    }
    seen.insert(m.id);
  }
  return out;
}

}  // namespace ipal
