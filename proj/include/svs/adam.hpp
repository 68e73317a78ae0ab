#pragma once

#include <cmath>
#include <vector>

#include "svs/autodiff.hpp"

namespace svs {

// Bias-corrected Adam over a fixed parameter list. Moment buffers are aligned
// with the list passed to init() and start at zero.
template <class Scalar>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;

  void init(const std::vector<Var<Scalar>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Tensor<Scalar>(p->value.shape()));
      v.push_back(Tensor<Scalar>(p->value.shape()));
    }
    step = 0;
  }
};

template <class Scalar>
void adam_step(std::vector<Var<Scalar>>& params, AdamState<Scalar>& st) {
  require(st.m.size() == params.size() && st.v.size() == params.size(),
          "adam_step: state holds ", st.m.size(), " moment buffers for ",
          params.size(), " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->requires_grad && params[i]->grad.size() > 0,
            "adam_step: parameter ", i, " has no gradient");
    require(st.m[i].shape() == params[i]->value.shape(),
            "adam_step: moment shape ", to_string(st.m[i].shape()),
            " does not match parameter ", to_string(params[i]->value.shape()));
  }
  st.step += 1;
  const Scalar b1 = Scalar(st.beta1), b2 = Scalar(st.beta2);
  const Scalar c1 = Scalar(1.0 - std::pow(st.beta1, double(st.step)));
  const Scalar c2 = Scalar(1.0 - std::pow(st.beta2, double(st.step)));
  const Scalar lr = Scalar(st.lr), eps = Scalar(st.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i]->grad.array();
    auto& m = st.m[i].array();
    auto& v = st.v[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g * g;
    params[i]->value.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    require_finite(params[i]->value, "adam_step parameter");
  }
}

}  // namespace svs
