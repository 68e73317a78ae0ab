#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "svs/tensor.hpp"

namespace svs {

// One value in the recorded computation. Leaves (parameters, inputs) have no
// backward function; op nodes capture their input Vars inside the closure,
// which also keeps them alive.
template <class Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::function<void(Node&)> backward_fn;
};

template <class Scalar>
using Var = std::shared_ptr<Node<Scalar>>;

template <class Scalar>
Var<Scalar> make_leaf(Tensor<Scalar> value, bool trainable = false) {
  auto n = std::make_shared<Node<Scalar>>();
  n->requires_grad = trainable;
  if (trainable) n->grad = Tensor<Scalar>(value.shape());
  n->value = std::move(value);
  return n;
}

template <class Scalar>
void zero_grad(const Var<Scalar>& v) {
  if (v->requires_grad) v->grad.array().setZero();
}

// Records op nodes in creation order; backward replays them in exact reverse
// creation order. A tape is single-use between resets.
template <class Scalar>
class Tape {
 public:
  Var<Scalar> record(Tensor<Scalar> value, bool requires_grad,
                     std::function<void(Node<Scalar>&)> backward_fn) {
    auto n = std::make_shared<Node<Scalar>>();
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad = Tensor<Scalar>(value.shape());
    n->value = std::move(value);
    n->backward_fn = std::move(backward_fn);
    nodes_.push_back(n);
    return n;
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every upstream grad.
  void backward(const Var<Scalar>& loss) {
    require(!used_, "backward already ran on this tape; reset() first");
    require(loss != nullptr && loss->value.size() == 1,
            "backward requires a scalar loss");
    bool found = false;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if (it->get() == loss.get()) {
        found = true;
        break;
      }
    require(found, "loss was not produced by this tape");
    require(loss->requires_grad,
            "loss does not depend on any trainable tensor");
    used_ = true;
    loss->grad.array()[0] = Scalar(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<Scalar>& n = **it;
      if (n.requires_grad && n.backward_fn) n.backward_fn(n);
    }
  }

  void reset() {
    nodes_.clear();
    used_ = false;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Var<Scalar>> nodes_;
  bool used_ = false;
};

}  // namespace svs
