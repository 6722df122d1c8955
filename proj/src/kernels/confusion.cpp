#include "ipal/kernels/confusion.hpp"

#include <algorithm>
#include <stdexcept>

namespace ipal::kernels {

namespace {

bool covered(std::int64_t t, std::span<const std::pair<std::int64_t, std::int64_t>> intervals) {
  // First interval whose end is not before t.
  auto it = std::lower_bound(intervals.begin(), intervals.end(), t,
                             [](const auto& iv, std::int64_t v) { return iv.second < v; });
  return it != intervals.end() && it->first <= t;
}

void check(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel inputs differ in length");
}

}  // namespace

void mark_intervals_serial(std::span<const std::int64_t> times,
                           std::span<const std::pair<std::int64_t, std::int64_t>> intervals,
                           std::span<std::uint8_t> predicted) {
  check(times.size(), predicted.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    if (covered(times[i], intervals)) predicted[i] = 1;
}

void mark_intervals_parallel(std::span<const std::int64_t> times,
                             std::span<const std::pair<std::int64_t, std::int64_t>> intervals,
                             std::span<std::uint8_t> predicted) {
  check(times.size(), predicted.size());
  const auto n = static_cast<std::ptrdiff_t>(times.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    if (covered(times[i], intervals)) predicted[i] = 1;
}

Confusion confusion_serial(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predicted) {
  check(labels.size(), predicted.size());
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) continue;
    const bool p = predicted[i] != 0;
    if (labels[i] == 1)
      ++(p ? c.tp : c.fn);
    else
      ++(p ? c.fp : c.tn);
  }
  return c;
}

Confusion confusion_parallel(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predicted) {
  check(labels.size(), predicted.size());
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
#pragma omp parallel for schedule(static) reduction(+ : tp, fp, tn, fn)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto l = labels[i];
    if (l > 1) continue;
    const bool p = predicted[i] != 0;
    tp += l == 1 && p;
    fn += l == 1 && !p;
    fp += l == 0 && p;
    tn += l == 0 && !p;
  }
  return {tp, fp, tn, fn};
}

}  // namespace ipal::kernels
