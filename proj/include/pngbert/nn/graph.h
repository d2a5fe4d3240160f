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

#ifndef PNGBERT_NN_GRAPH_H_
#define PNGBERT_NN_GRAPH_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pngbert/nn/tensor.h"

namespace pngbert::nn {

struct Parameter {
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Named parameters in name order. Addresses are stable for the lifetime of
// the store, so graphs may hold pointers into it.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Sets trainable on every parameter whose name starts with prefix.
  void set_trainable(const std::string& prefix, bool trainable);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

class Graph;

// Handle to a node on a Graph tape.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are recorded in creation order and replayed
// backwards by backward(). Ops whose inputs need no gradient record no
// closure, so frozen sub-networks cost forward work only.
class Graph {
 public:
  // Called with the upstream gradient of the node and the node's value.
  using BackwardFn = std::function<void(const Tensor& grad_out, const Tensor& value)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value);
  // Leaf that collects its gradient on the tape (used by grad_check).
  Var input(Tensor value);
  // Leaf bound to a parameter; its gradient is added to param.grad by backward().
  Var param(Parameter& param);

  // Records an op result. `fn` runs only if some input requires grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(const Var& v) const { return nodes_[v.id()].value; }
  const Tensor& grad(const Var& v) const { return nodes_[v.id()].grad; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  // Zero-initialized on first use. Only valid for nodes that require grad.
  Tensor& grad_buffer(const Var& v);

  // Seeds d(loss)/d(loss) = 1; loss must be a single value.
  void backward(const Var& loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

}  // namespace pngbert::nn

#endif  // PNGBERT_NN_GRAPH_H_
