#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazeaeg/tensor.hpp"

namespace gazeaeg::num {

// Ordered, named collection of trainable tensors.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  Tensor& value(std::string_view name) { return values_.at(index_of(name)); }
  const Tensor& value(std::string_view name) const { return values_.at(index_of(name)); }

  std::span<Tensor> tensors() { return values_; }
  std::span<const Tensor> tensors() const { return values_; }
  std::span<const std::string> names() const { return names_; }

  std::size_t total_size() const;
  bool operator==(const ParamStore& other) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Gradient buffers laid out like a ParamStore.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& params);

  std::size_t size() const { return grads_.size(); }
  Tensor& operator[](std::size_t i) { return grads_.at(i); }
  const Tensor& operator[](std::size_t i) const { return grads_.at(i); }

  void set_zero();
  void add(const Gradients& other);
  void scale(double factor);

 private:
  std::vector<Tensor> grads_;
};

struct Var {
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

// Record of one forward pass. Nodes are appended in execution order, so
// every node's inputs precede it; backward() walks the record in reverse.
// A tape belongs to a single thread.
class Tape {
 public:
  // Receives the output gradient and routes it to the op's inputs.
  using Backprop = std::function<void(Tape&, const Tensor& out_grad)>;

  // Parameter gradients are accumulated into `sink` when one is given.
  explicit Tape(Gradients* sink = nullptr) : sink_(sink) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable input that owns its gradient.
  Var leaf(Tensor value);
  // Parameter referenced in place; the store must outlive the tape.
  Var param(const ParamStore& store, std::size_t index);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Accumulated gradient, or nullptr if none reached the node.
  const Tensor* grad(Var v) const;
  // Accumulator for an op's input; nullptr when the input needs no gradient.
  Tensor* grad_target(Var v);

  // Appends an op result. `backprop` is dropped when no input needs a
  // gradient. Non-finite results throw NumericError.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop, std::string_view op);
  Var record(Tensor value, std::span<const Var> inputs, Backprop backprop, std::string_view op);

  // Reverse sweep from a scalar loss. Intermediate gradients are released
  // as soon as they have been propagated.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Kind : std::uint8_t { Constant, Leaf, Param, Op };
  struct Node {
    Kind kind = Kind::Op;
    Tensor owned;
    const Tensor* value = nullptr;
    Tensor grad;
    Tensor* external_grad = nullptr;
    bool requires_grad = false;
    Backprop backprop;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);

  std::deque<Node> nodes_;
  Gradients* sink_ = nullptr;
  bool backward_done_ = false;
};

}  // namespace gazeaeg::num
