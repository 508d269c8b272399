#include "smamba/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "smamba/error.hpp"

namespace smamba {

namespace {

std::uint64_t next_graph_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " needs " +
                         std::to_string(shape_numel(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor construction");
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

std::span<double> Tensor::mutable_data() {
  node_.reset();
  return data_;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t(std::move(shape), data_, requires_grad_);
  return t;
}

Graph::Graph() : id_(next_graph_id()) {}

Tensor Graph::track(const Tensor& t) {
  if (!t.requires_grad()) return t;
  if (consumed_) throw ContractError("graph already ran backward");
  Tensor leaf = t;
  nodes_.push_back(Node{t.shape(), {}, nullptr, {}});
  leaf.node_ = NodeRef{id_, nodes_.size() - 1};
  return leaf;
}

Graph::InputSlot Graph::slot(const Tensor& t) const {
  if (t.node_ && t.node_->graph == id_ && t.node_->index < nodes_.size()) return t.node_->index;
  return std::nullopt;
}

bool Graph::any_tracked(std::initializer_list<const Tensor*> inputs) const {
  if (consumed_) return false;
  for (const Tensor* t : inputs) {
    if (slot(*t)) return true;
  }
  return false;
}

Tensor Graph::record(Tensor out, std::vector<InputSlot> inputs, BackwardFn fn) {
  if (consumed_) throw ContractError("graph already ran backward");
  nodes_.push_back(Node{out.shape(), std::move(inputs), std::move(fn), {}});
  out.node_ = NodeRef{id_, nodes_.size() - 1};
  out.requires_grad_ = true;
  return out;
}

std::span<double> Graph::input_grad(const InputSlot& slot) {
  if (!slot) return {};
  Node& n = nodes_[*slot];
  if (n.grad.empty()) n.grad.assign(shape_numel(n.shape), 0.0);
  return n.grad;
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (consumed_) throw ContractError("graph already ran backward");
  const auto root = slot(loss);
  if (!root) throw ContractError("loss does not belong to this graph");

  input_grad(root)[0] = 1.0;
  visits_ = 0;
  for (std::size_t i = *root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.fn || n.grad.empty()) continue;
    ++visits_;
    // Closures only touch buffers of earlier nodes, so n.grad stays put.
    n.fn(n.grad, *this);
  }
  for (auto& n : nodes_) {
    n.fn = nullptr;
    n.inputs.clear();
  }
  consumed_ = true;
}

Tensor Graph::grad(const Tensor& t) const {
  const auto s = slot(t);
  if (!s) throw ContractError("tensor is not tracked by this graph");
  const Node& n = nodes_[*s];
  if (n.grad.empty()) return Tensor::zeros(n.shape);
  return Tensor(n.shape, n.grad);
}

}  // namespace smamba
