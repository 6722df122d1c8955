#include "ipal/kernels/departure.hpp"

#include <stdexcept>

namespace ipal::kernels {

double departure(const double* U, std::size_t L, std::size_t r, const double* c, const double* x) {
  double d = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    const double* col = U + j * L;
    double p = 0.0;
    for (std::size_t l = 0; l < L; ++l) p += col[l] * x[l];
    const double diff = c[j] - p;
    d += diff * diff;
  }
  return d;
}

namespace {

void check(std::span<const double> series, std::size_t L, std::span<double> out) {
  if (L == 0 || series.size() < L || out.size() != series.size() - L + 1)
    throw std::invalid_argument("departure_scores: output size must be series.size() - L + 1");
}

}  // namespace

void departure_scores_serial(std::span<const double> series, const double* U, std::size_t L, std::size_t r,
                             const double* c, std::span<double> out) {
  check(series, L, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = departure(U, L, r, c, series.data() + i);
}

void departure_scores_parallel(std::span<const double> series, const double* U, std::size_t L, std::size_t r,
                               const double* c, std::span<double> out) {
  check(series, L, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = departure(U, L, r, c, series.data() + i);
}

}  // namespace ipal::kernels
