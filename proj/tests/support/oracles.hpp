#pragma once

#include <cstddef>
#include <vector>

#include "gcn/tensor.hpp"

namespace gcn::testing {

// Independent convolution oracle: materializes the zero-padded input and
// runs the definition directly. Deliberately shares no code with the
// library implementation.
inline Tensor conv_oracle(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const std::size_t n = input.dim(0);
  const std::size_t d = input.dim(1);
  const std::size_t f = kernels.dim(0);
  const std::size_t h = kernels.dim(1);
  const std::size_t pad_top = (h - 1) / 2;

  std::vector<std::vector<double>> padded(n + h - 1, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) padded[i + pad_top][c] = input.at(i, c);
  }

  Tensor out({n, f});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < f; ++k) {
      double acc = bias[k];
      for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t c = 0; c < d; ++c) {
          acc += padded[i + j][c] * kernels.at(k, j, c);
        }
      }
      out.at(i, k) = acc;
    }
  }
  return out;
}

}  // namespace gcn::testing
