#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace ipal::detect {

/// Subspace model of one variable's lagged windows.
struct PasadFit {
  std::string variable;
  std::size_t L = 0;  // lag (window length)
  std::size_t N = 0;  // training prefix length
  std::size_t r = 0;  // subspace dimension actually used
  Eigen::MatrixXd U;  // L x r, orthonormal columns
  Eigen::VectorXd c;  // centroid of the projected training windows
  double theta = 0.0;
  std::vector<double> singular_values;

  double departure(const double* window) const;
  nlohmann::ordered_json to_json() const;
  static PasadFit from_json(const nlohmann::ordered_json& j);
};

struct PasadParams {
  std::size_t L = 50;
  std::size_t N = 0;  // 0: everything before the validation tail
  std::size_t r = 2;
  double validation_fraction = 0.2;
  bool parallel = true;
};

/// Fits on `series` (all training values of one variable in order). The
/// threshold is the maximum departure over windows ending in the last
/// `validation_fraction` of the series (over the training windows when the
/// fraction is zero). r above the numerical rank is clamped with a warning.
PasadFit pasad_fit(std::span<const double> series, const PasadParams& p, std::string variable = {});

}  // namespace ipal::detect
