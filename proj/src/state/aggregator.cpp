#include "ipal/state/aggregator.hpp"

#include <fmt/format.h>

#include "ipal/error.hpp"

namespace ipal::state {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && (a > 0)) ? q + 1 : q;
}

}  // namespace

Aggregator::Aggregator(AggregatorConfig cfg) : cfg_(cfg) {
  if (cfg_.interval <= Duration::zero()) throw UsageError("aggregation interval must be positive");
}

std::int64_t Aggregator::boundary_index(Timestamp t) const {
  return ceil_div((t - *origin_).count(), cfg_.interval.count());
}

Timestamp Aggregator::boundary(std::int64_t k) const { return *origin_ + cfg_.interval * k; }

void Aggregator::emit(std::int64_t k, std::vector<StateMessage>& out) {
  if (cache_.empty()) return;
  StateMessage s;
  s.timestamp = boundary(k);
  s.state = cache_;
  if (any_malicious_)
    s.malicious = Label::malicious;
  else if (any_benign_ || stream_labeled_)
    s.malicious = Label::benign;
  else
    s.malicious = Label::unlabeled;
  out.push_back(std::move(s));
}

void Aggregator::push(const IpalMessage& m, std::vector<StateMessage>& out) {
  if (last_time_ && m.timestamp < *last_time_)
    throw DataError(fmt::format("message {} at {} precedes the previous message at {}", m.id,
                                format_seconds(m.timestamp), format_seconds(*last_time_)));
  last_time_ = m.timestamp;
  if (!origin_) origin_ = cfg_.start == StartPolicy::first_message ? m.timestamp : Timestamp{};

  const auto k = boundary_index(m.timestamp);
  if (!open_) {
    current_ = k;
    open_ = true;
  }
  while (current_ < k) {
    emit(current_, out);
    any_malicious_ = any_benign_ = false;
    ++current_;
  }

  for (const auto& [name, v] : m.process_data) cache_.insert_or_assign(name, v);
  if (m.malicious == Label::malicious) any_malicious_ = true;
  if (m.malicious == Label::benign) any_benign_ = true;
  if (m.malicious != Label::unlabeled) stream_labeled_ = true;
}

void Aggregator::finish(std::vector<StateMessage>& out) {
  if (!open_) return;
  emit(current_, out);
  open_ = false;
}

std::vector<StateMessage> aggregate(std::span<const IpalMessage> msgs, const AggregatorConfig& cfg) {
  Aggregator agg(cfg);
  std::vector<StateMessage> out;
  for (const auto& m : msgs) agg.push(m, out);
  agg.finish(out);
  return out;
}

std::vector<IpalMessage> states_to_messages(std::span<const StateMessage> states) {
  std::vector<IpalMessage> out;
  out.reserve(states.size());
  std::uint64_t id = 0;
  for (const auto& s : states) {
    IpalMessage m;
    m.id = id++;
    m.timestamp = s.timestamp;
    m.protocol = "state";
    m.malicious = s.malicious;
    m.source = "state-log";
    m.type = std::int64_t{0};
    m.activity = Activity::response;
    m.process_data = s.state;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace ipal::state
