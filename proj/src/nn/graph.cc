// Copyright (c) 2026 The pngbert-ja Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pngbert/nn/graph.h"

#include <stdexcept>

#include "pngbert/common/errors.h"

namespace pngbert::nn {

Parameter& ParameterStore::add(const std::string& name, Tensor init) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw std::invalid_argument("duplicate parameter " + name);
  it->second.grad = Tensor(init.shape());
  it->second.value = std::move(init);
  return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.grad.fill(0.0);
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [name, p] : params_) {
    if (name.compare(0, prefix.size(), prefix) == 0) p.trainable = trainable;
  }
}

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

Var Graph::push(Node node) {
  if (!node.value.all_finite()) {
    throw DivergenceError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

Var Graph::param(Parameter& param) {
  Node n;
  n.value = param.value;
  n.requires_grad = grad_enabled_ && param.trainable;
  n.param = n.requires_grad ? &param : nullptr;
  return push(std::move(n));
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(const Var& loss) {
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) throw ShapeError("backward() needs a scalar loss");
  if (!root.requires_grad) return;
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad, n.value);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

}  // namespace pngbert::nn
