#pragma once

#include <cstdint>
#include <string>

#include "antkit/arch.hpp"

namespace antkit {

struct GradcheckResult {
  double max_rel_err = 0;
  std::string worst_param;
  int coords_checked = 0;
  int coords_skipped = 0;  // kink-straddling coordinates, resampled
};

// Central differences against reverse mode on a scalar probe loss
// sum(output * fixed_random). Training-mode forward with frozen running
// stats, so batch statistics stay differentiable and state stays put. Checks
// every ensemble weight plus a random sample of the other coordinates
// (>= min_coords overall). A coordinate whose two displaced evaluations land
// in different ReLU linear segments straddles a kink, where central
// differences are meaningless; such draws are skipped and redrawn.
GradcheckResult gradcheck_network(Network& net, const Tensor& input,
                                  double epsilon = 1e-4, int min_coords = 200,
                                  std::uint64_t seed = 1);

}  // namespace antkit
