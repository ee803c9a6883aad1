#include "dualcorr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualcorr::num {

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<Tensor>& params,
                                  double eps) {
  if (params.empty()) {
    throw std::invalid_argument("finite_diff_check: no parameters");
  }

  for (auto p : params) p.zero_grad();
  Tensor loss = f();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    auto vals = p.mutable_values();
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(vals.size()); ++i) {
      const double saved = vals[i];
      vals[i] = saved + eps;
      const double up = f().value();
      vals[i] = saved - eps;
      const double down = f().value();
      vals[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) /
                         std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = pi;
        report.worst_coord = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace dualcorr::num
