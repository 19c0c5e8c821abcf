#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "itreg/linops.hpp"
#include "itreg/regularizers.hpp"

namespace itreg {

// Linear inverse problem y_noisy = X w_true + noise.
struct ProblemInstance {
  DenseOperator x;
  Vector w_true;
  Vector y_clean;
  Vector y_noisy;
  double noise_norm = 0.0;  // realized |y_noisy - y_clean|
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  RegularizerSpec reg;
  std::string id;
};

}  // namespace itreg
