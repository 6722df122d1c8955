#pragma once

#include <cstddef>
#include <span>

namespace ipal::kernels {

/// Departure of one lagged window: ||c - U^T x||^2. `U` is L x r,
/// column-major; `x` holds L values.
double departure(const double* U, std::size_t L, std::size_t r, const double* c, const double* x);

/// Scores of all windows of `series`: out[i] is the departure of
/// series[i .. i+L-1]; out.size() must be series.size() - L + 1.
/// Both variants perform identical arithmetic per window, so results are
/// bit-identical.
void departure_scores_serial(std::span<const double> series, const double* U, std::size_t L, std::size_t r,
                             const double* c, std::span<double> out);
void departure_scores_parallel(std::span<const double> series, const double* U, std::size_t L, std::size_t r,
                               const double* c, std::span<double> out);

}  // namespace ipal::kernels
