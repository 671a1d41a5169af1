#include "doctest.h"
#include "gcn/grad_check.hpp"
#include "gcn/ops.hpp"

using namespace gcn;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("relative error uses the symmetric denominator") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 0.0) == 0.0);
}

TEST_CASE("dense layer passes the gradient check across seeds") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Rng rng(seed);
    Tensor x = random_tensor(rng, {4});
    Tensor w = random_tensor(rng, {4, 3});
    Tensor b = random_tensor(rng, {3});
    const Tensor up = random_tensor(rng, {3});
    auto loss = [&]() {
      const Tensor y = dense(x, w, b);
      double sum = 0.0;
      for (std::size_t i = 0; i < y.numel(); ++i) sum += y[i] * up[i];
      return sum;
    };
    const DenseGrads g = dense_backward(x, w, up);
    CHECK(grad_check(loss, {&x, &w, &b}, {&g.x, &g.w, &g.b}) <= 1e-5);
  }
}

TEST_CASE("conv passes the gradient check across seeds") {
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    Rng rng(seed);
    Tensor input = random_tensor(rng, {7, 2});
    Tensor kernels = random_tensor(rng, {2, 3, 2});
    Tensor bias = random_tensor(rng, {2});
    const Tensor up = random_tensor(rng, {7, 2});
    auto loss = [&]() {
      const Tensor y = conv1d_same(input, kernels, bias);
      double sum = 0.0;
      for (std::size_t i = 0; i < y.numel(); ++i) sum += y[i] * up[i];
      return sum;
    };
    const Conv1dGrads g = conv1d_same_backward(input, kernels, up);
    CHECK(grad_check(loss, {&input, &kernels, &bias}, {&g.input, &g.kernels, &g.bias}) <= 1e-5);
  }
}

TEST_CASE("a constant function reports zero error") {
  Rng rng(5);
  Tensor x = random_tensor(rng, {6});
  const Tensor zero_grad({6});
  auto loss = []() { return 42.0; };
  CHECK(grad_check(loss, {&x}, {&zero_grad}) == 0.0);
}
