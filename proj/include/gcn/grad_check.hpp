#pragma once

#include <functional>
#include <vector>

#include "gcn/tensor.hpp"

namespace gcn {

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double relative_error(double analytic, double numeric);

// Central-difference gradient check. loss_fn must be a pure function of the
// current contents of `params` (re-run dropout with the same masks, same
// data). `analytic` holds the gradient tensors in the same order. Returns the
// max relative error over every parameter element.
double grad_check(const std::function<double()>& loss_fn, const std::vector<Tensor*>& params,
                  const std::vector<const Tensor*>& analytic, double eps = 1e-5);

}  // namespace gcn
