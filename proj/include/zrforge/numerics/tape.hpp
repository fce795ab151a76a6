/*
 * Copyright 2026 The zrforge Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zrforge/numerics/tensor.hpp"

namespace zrforge::nn {

template <typename T>
class Tape;

// Handle to a node recorded on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Ordered registry of named parameters. Addresses are stable for the
// lifetime of the set.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(value)));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter<T>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw std::out_of_range("no parameter " + name);
    return *p;
  }

  std::size_t count() const { return params_.size(); }

  // Total number of scalar values.
  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Append-only record of executed ops. Node ids are assigned in execution
// order, so a reverse sweep over ids is a reverse topological order.
// A tape belongs to one thread of execution.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  Tape() = default;
  // With track_grad false, parameters enter as constants and nothing records
  // a backward step (inference).
  explicit Tape(bool track_grad) : track_grad_(track_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}});
    return Var<T>(this, last_id());
  }

  // Leaf bound to a trainable parameter; repeated calls return the same node.
  Var<T> param(Parameter<T>& p) {
    const auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var<T>(this, it->second);
    if (track_grad_) {
      nodes_.push_back(Node{p.value, {}, &p, true, {}});
    } else {
      nodes_.push_back(Node{p.value, {}, nullptr, false, {}});
    }
    param_ids_.emplace(&p, last_id());
    return Var<T>(this, last_id());
  }

  Var<T> record(Tensor<T> value, std::span<const Var<T>> parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& v : parents) needs = needs || requires_grad(v.id());
    nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(fn) : BackwardFn{}});
    return Var<T>(this, last_id());
  }
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record(std::move(value), std::span<const Var<T>>(parents.begin(), parents.size()),
                  std::move(fn));
  }

  const Tensor<T>& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  bool is_param(std::uint32_t id) const { return nodes_[id].param != nullptr; }

  // Gradient buffer of a node, allocated as zeros on first access. For
  // parameter leaves this is the parameter's own accumulator.
  Tensor<T>& grad(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.param) return n.param->grad;
    if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  // Gradient pointer for a parent, or nullptr when it needs no gradient.
  T* grad_ptr(std::uint32_t id) { return requires_grad(id) ? grad(id).data() : nullptr; }

  bool has_grad(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param ? true : n.grad.size() == n.value.size() && n.value.size() > 0;
  }

  std::size_t size() const { return nodes_.size(); }

  // Accumulates d(loss)/d(param) into every parameter bound on this tape.
  void backward(const Var<T>& loss) {
    if (loss.value().size() != 1) {
      throw ShapeError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
    }
    for (auto& n : nodes_) {
      if (!n.param) n.grad = Tensor<T>();
    }
    if (!requires_grad(loss.id())) return;
    if (is_param(loss.id())) {
      grad(loss.id())[0] += T{1};
      return;
    }
    grad(loss.id())[0] = T{1};
    for (std::int64_t id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.backward || n.param) continue;
      if (n.grad.size() != n.value.size()) continue;  // unreached
      n.backward(*this, static_cast<std::uint32_t>(id));
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param;
    bool requires_grad;
    BackwardFn backward;
  };

  std::uint32_t last_id() const { return static_cast<std::uint32_t>(nodes_.size() - 1); }

  bool track_grad_ = true;
  std::deque<Node> nodes_;
  std::unordered_map<Parameter<T>*, std::uint32_t> param_ids_;
};

}  // namespace zrforge::nn
