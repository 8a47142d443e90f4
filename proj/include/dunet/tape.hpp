// Copyright 2026 The DUNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef DUNET_TAPE_HPP_
#define DUNET_TAPE_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dunet/errors.hpp"
#include "dunet/parameter.hpp"
#include "dunet/tensor.hpp"

namespace dunet {

template <typename Scalar>
class Tape;

// Handle to a value recorded on a tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<Scalar>& value() const { return tape_->value(*this); }
  const Shape& shape() const { return value().shape(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so a
// node's parents always precede it. Node storage is a deque: references to
// recorded values stay valid while the tape grows, which lets backward rules
// capture their inputs by reference.
template <typename Scalar>
class Tape {
 public:
  using TensorT = Tensor<Scalar>;
  // Receives the gradient of the node's output and one slot per parent;
  // slots of parents that do not require gradients are null.
  using BackwardFn = std::function<void(const TensorT& grad_out, std::span<TensorT* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(TensorT value) { return push("constant", std::move(value), {}, nullptr, false, nullptr); }

  Var<Scalar> variable(TensorT value) { return push("variable", std::move(value), {}, nullptr, true, nullptr); }

  // Leaf bound to a parameter; backward() accumulates into `param.grad`.
  Var<Scalar> parameter(Parameter<Scalar>& param) {
    return push(param.name, param.value, {}, nullptr, true, &param);
  }

  Var<Scalar> record(std::string op, TensorT value, const std::vector<Var<Scalar>>& parents, BackwardFn backward) {
    if (!value.all_finite()) throw NumericError("non-finite value produced by " + op);
    std::vector<std::size_t> ids;
    ids.reserve(parents.size());
    bool needs_grad = false;
    for (const auto& p : parents) {
      if (&p.tape() != this) throw StateError(op + ": operand recorded on a different tape");
      ids.push_back(p.id());
      needs_grad = needs_grad || nodes_[p.id()].requires_grad;
    }
    if (!needs_grad) backward = nullptr;
    return push(std::move(op), std::move(value), std::move(ids), std::move(backward), needs_grad, nullptr);
  }

  const TensorT& value(const Var<Scalar>& v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(const Var<Scalar>& v) const { return nodes_.at(v.id()).requires_grad; }
  const std::string& op_name(const Var<Scalar>& v) const { return nodes_.at(v.id()).op; }

  const TensorT& grad(const Var<Scalar>& v) const {
    const Node& node = nodes_.at(v.id());
    if (!backward_done_) throw StateError("grad() requested before backward()");
    if (!node.requires_grad) throw StateError("node '" + node.op + "' does not require gradients");
    return node.grad;
  }

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  void backward(const Var<Scalar>& loss) {
    if (backward_done_) throw StateError("backward() already ran on this tape; call reset() first");
    Node& root = nodes_.at(loss.id());
    if (root.value.size() != 1) {
      throw DimensionError("backward() needs a scalar loss, got " + shape_string(root.value.shape()));
    }
    backward_done_ = true;
    if (!root.requires_grad) return;

    for (std::size_t i = 0; i <= loss.id(); ++i) {
      if (nodes_[i].requires_grad) nodes_[i].grad = TensorT::zeros_like(nodes_[i].value);
    }
    root.grad.data().setConstant(Scalar(1));

    std::vector<TensorT*> slots;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.requires_grad || !node.backward) continue;
      slots.clear();
      for (std::size_t p : node.parents) {
        slots.push_back(nodes_[p].requires_grad ? &nodes_[p].grad : nullptr);
      }
      node.backward(node.grad, std::span<TensorT* const>(slots));
    }

    for (std::size_t i = 0; i <= loss.id(); ++i) {
      Node& node = nodes_[i];
      if (node.param != nullptr) node.param->grad.data() += node.grad.data();
    }
  }

  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

 private:
  struct Node {
    std::string op;
    TensorT value;
    TensorT grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter<Scalar>* param = nullptr;
  };

  Var<Scalar> push(std::string op, TensorT value, std::vector<std::size_t> parents, BackwardFn backward,
                   bool requires_grad, Parameter<Scalar>* param) {
    if (backward_done_) throw StateError("cannot record on a tape after backward(); call reset() first");
    nodes_.push_back(Node{std::move(op), std::move(value), TensorT(), std::move(parents), std::move(backward),
                          requires_grad, param});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace dunet

#endif  // DUNET_TAPE_HPP_
