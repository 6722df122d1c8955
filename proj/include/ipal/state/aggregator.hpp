#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ipal/message.hpp"

namespace ipal::state {

enum class StartPolicy {
  aligned_to_epoch,  // boundaries at multiples of the interval
  first_message,     // boundaries offset from the first message timestamp
};

struct AggregatorConfig {
  Duration interval = std::chrono::seconds(1);
  StartPolicy start = StartPolicy::aligned_to_epoch;
};

/// Last-value-hold aggregation into fixed-interval snapshots. A message at
/// time t contributes to the snapshot emitted at the first boundary >= t.
/// Snapshots before the first variable is known are suppressed.
class Aggregator {
 public:
  explicit Aggregator(AggregatorConfig cfg);

  /// Emits every snapshot whose interval closed before `m`.
  void push(const IpalMessage& m, std::vector<StateMessage>& out);
  /// Emits the snapshot of the interval still open.
  void finish(std::vector<StateMessage>& out);

 private:
  std::int64_t boundary_index(Timestamp t) const;
  Timestamp boundary(std::int64_t k) const;
  void emit(std::int64_t k, std::vector<StateMessage>& out);

  AggregatorConfig cfg_;
  std::optional<Timestamp> origin_;
  std::optional<Timestamp> last_time_;
  std::int64_t current_ = 0;
  bool open_ = false;
  ProcessData cache_;
  bool any_malicious_ = false;
  bool any_benign_ = false;
  bool stream_labeled_ = false;
};

std::vector<StateMessage> aggregate(std::span<const IpalMessage> msgs, const AggregatorConfig& cfg);

/// One synthetic message per state, stamped at the state's timestamp and
/// carrying the full snapshot. Aggregating the result at the same interval
/// returns the original states.
std::vector<IpalMessage> states_to_messages(std::span<const StateMessage> states);

}  // namespace ipal::state
