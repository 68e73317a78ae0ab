#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "svs/autodiff.hpp"

namespace svs::testing {

// Central-difference oracle for tape ops. Runs one analytic backward, then
// perturbs every element of every listed leaf and re-evaluates the scalar
// loss rebuilt by `build` on a fresh tape. Independent of the backward path
// it checks: only forward evaluations feed the numeric side.
inline void fd_check_leaves(
    const std::vector<Var<double>>& leaves,
    const std::function<Var<double>(Tape<double>&)>& build, double h = 1e-4,
    double atol = 1e-6, double rtol = 1e-3) {
  for (const auto& leaf : leaves) zero_grad(leaf);
  {
    Tape<double> tape;
    auto loss = build(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape<double> tape;
    auto loss = build(tape);
    return loss->value.array()[0];
  };
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& value = leaves[li]->value;
    for (Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + h;
      const double fp = eval();
      value.data()[i] = saved - h;
      const double fm = eval();
      value.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = leaves[li]->grad.data()[i];
      const double tol = atol + rtol * std::abs(numeric);
      INFO("leaf ", li, " element ", i, ": analytic ", analytic, " numeric ",
           numeric);
      CHECK(std::abs(analytic - numeric) <= tol);
    }
  }
}

inline Tensor<double> random_tensor(Shape s, std::mt19937& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(s);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

}  // namespace svs::testing
