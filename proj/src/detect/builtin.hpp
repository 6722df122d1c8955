#pragma once

#include "ipal/detect/detector.hpp"

namespace ipal::detect {

DetectorInfo iat_mean_info();
DetectorInfo iat_range_info();
DetectorInfo dtmc_info();
DetectorInfo pasad_info();
DetectorInfo ooa_info();

}  // namespace ipal::detect
