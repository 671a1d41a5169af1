#include "gcn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gcn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

double grad_check(const std::function<double()>& loss_fn, const std::vector<Tensor*>& params,
                  const std::vector<const Tensor*>& analytic, double eps) {
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("grad_check: params/analytic count mismatch");
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& param = *params[t];
    const Tensor& grad = *analytic[t];
    require_shape(param.same_shape(grad), "grad_check: gradient shape mismatch");
    for (std::size_t i = 0; i < param.numel(); ++i) {
      const double saved = param[i];
      param[i] = saved + eps;
      const double up = loss_fn();
      param[i] = saved - eps;
      const double down = loss_fn();
      param[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, relative_error(grad[i], numeric));
    }
  }
  return worst;
}

}  // namespace gcn
