#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipal/message.hpp"

namespace ipal {

namespace rule {
inline constexpr const char* id_monotonicity = "id monotonicity";
inline constexpr const char* responds_before = "responds_to < id";
inline constexpr const char* dangling = "dangling responds_to";
inline constexpr const char* source_empty = "non-empty source";
inline constexpr const char* finite_value = "finite process value";
}  // namespace rule

struct Violation {
  std::size_t index = 0;  // position in the stream
  std::uint64_t id = 0;
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Single-record checks. Throws ValidationError naming the first broken rule.
void validate_message(const IpalMessage& m);

/// Every violation in the stream, in stream order. Empty iff well-formed.
std::vector<Violation> validate_stream(std::span<const IpalMessage> msgs);

}  // namespace ipal
