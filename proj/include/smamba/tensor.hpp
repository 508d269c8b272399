#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace smamba {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Handle into the graph that produced (or tracks) a tensor. The graph serial
// makes handles from a finished or foreign graph inert.
struct NodeRef {
  std::uint64_t graph = 0;
  std::size_t index = 0;
};

// Dense row-major float64 array. Plain value type: copying a tensor copies its
// data and its node handle.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  // Writable view; detaches the tensor from any graph.
  std::span<double> mutable_data();
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }
  const std::optional<NodeRef>& node() const { return node_; }

  // Same data under a new shape with equal element count. Graph-free; use
  // ops::reshape to keep the gradient path.
  Tensor reshaped(Shape shape) const;

 private:
  friend class Graph;
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::optional<NodeRef> node_;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so insertion
// order is a topological order and backward walks it in reverse.
class Graph {
 public:
  using InputSlot = std::optional<std::size_t>;
  using BackwardFn = std::function<void(std::span<const double> grad_out, Graph& graph)>;

  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Registers a leaf. Tensors with requires_grad == false come back unchanged
  // and are treated as constants by every op.
  Tensor track(const Tensor& t);

  // Node index of t in this graph, if t participates in it.
  InputSlot slot(const Tensor& t) const;
  bool any_tracked(std::initializer_list<const Tensor*> inputs) const;

  // Appends an op node and stamps `out` with it. `fn` receives the gradient of
  // `out` and accumulates into its inputs through input_grad().
  Tensor record(Tensor out, std::vector<InputSlot> inputs, BackwardFn fn);

  // Gradient accumulator for an input slot; empty span when the input is a
  // constant.
  std::span<double> input_grad(const InputSlot& slot);

  // Runs reverse accumulation from a scalar loss, then releases the recorded
  // closures. Leaf gradients stay readable through grad().
  void backward(const Tensor& loss);

  // Gradient of a tracked tensor (zeros when nothing flowed to it).
  Tensor grad(const Tensor& t) const;

  // Number of node visits performed by the last backward pass.
  std::size_t backward_visits() const { return visits_; }

 private:
  struct Node {
    Shape shape;
    std::vector<InputSlot> inputs;
    BackwardFn fn;
    std::vector<double> grad;
  };

  std::uint64_t id_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
  std::size_t visits_ = 0;
};

}  // namespace smamba
