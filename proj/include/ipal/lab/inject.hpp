#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipal/message.hpp"
#include "ipal/scenario.hpp"

namespace ipal::lab {

enum class AttackFamily { flooding, injection, prediction, copy, remove, swap, value_manipulation };

std::string_view to_string(AttackFamily f);
std::optional<AttackFamily> parse_attack_family(std::string_view s);

/// Parameters of one attack. Which fields matter depends on the family:
///   flooding            rate = packets per second inside the window
///   injection           count = packets inserted (default: one per 10 s of window)
///   prediction          rate = probability of replacing a data-carrying packet
///   copy/remove/swap    rate = per-packet probability in (0, 1]
///   value_manipulation  variable, value | (scale, offset)
struct AttackSpec {
  AttackFamily family = AttackFamily::flooding;
  /// Absent: the whole stream.
  std::optional<Timestamp> window_start;
  std::optional<Timestamp> window_end;
  double rate = 1.0;
  std::optional<std::size_t> count;
  /// Substring matched against source and destination; empty = every
  /// connection for mutations, the first server seen for insertions.
  std::string target;
  std::string variable;
  std::optional<double> value;
  double scale = 1.0;
  double offset = 0.0;
  /// Timing noise (s, stddev) of prediction replacements; zero is exactly
  /// on schedule.
  double prediction_jitter = 0.0;
  /// Injection offsets, as a fraction of the gap to the next packet.
  double injection_min = 0.2;
  double injection_max = 0.8;
  std::uint64_t seed = 1;
  std::string name;  // scenario name; defaults to the family
};

struct InjectionResult {
  std::vector<IpalMessage> stream;
  std::size_t labeled = 0;  // records marked malicious by this attack
  std::size_t removed = 0;
  /// Positions in the input stream whose packet was mutated (copied,
  /// removed, swapped, replaced, manipulated), ascending.
  std::vector<std::size_t> mutated_positions;
  std::vector<Timestamp> gaps;  // timestamps of removed packets
  Scenario scenario;
};

/// Applies one attack. Ids are renumbered densely in timestamp order and
/// responds_to remapped; links that would point forward or at a removed
/// packet are dropped so the result always passes validate_stream.
InjectionResult inject(const std::vector<IpalMessage>& stream, const AttackSpec& atk);

}  // namespace ipal::lab
