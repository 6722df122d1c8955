#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ipal::kernels {

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool operator==(const Confusion&) const = default;
};

/// Marks records whose timestamp (microseconds, ascending) falls in one of
/// the closed `intervals`, which must be sorted and disjoint. Existing marks
/// are kept.
void mark_intervals_serial(std::span<const std::int64_t> times,
                           std::span<const std::pair<std::int64_t, std::int64_t>> intervals,
                           std::span<std::uint8_t> predicted);
void mark_intervals_parallel(std::span<const std::int64_t> times,
                             std::span<const std::pair<std::int64_t, std::int64_t>> intervals,
                             std::span<std::uint8_t> predicted);

/// Confusion counts over records with a label; label 1 = attack, 0 = benign,
/// anything else is skipped.
Confusion confusion_serial(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predicted);
Confusion confusion_parallel(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predicted);

}  // namespace ipal::kernels
