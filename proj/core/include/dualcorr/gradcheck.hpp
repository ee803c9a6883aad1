#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dualcorr/tensor.hpp"

namespace dualcorr::num {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;   // index into the params vector
  std::int64_t worst_coord = 0;  // flat offset within that parameter
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::int64_t coords_checked = 0;
};

// Central-difference gradient verification. `f` rebuilds the scalar loss from
// the current values of `params` (all leaves) on every call. The relative
// error per coordinate is |analytic - numeric| / max(1e-8, |analytic| +
// |numeric|); the report carries the maximum and where it occurred.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<Tensor>& params,
                                  double eps = 1e-5);

}  // namespace dualcorr::num
