#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation of one forward pass. Parameters live outside
// the tape in a ParameterSet; Tape::param() pulls them in as leaves and
// Tape::accumulate_param_grads() pushes the leaf gradients back after
// backward(). Vectors are column matrices (rows x 1).

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace disem::ad {

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::size_t size() const { return data.size(); }
  void zero_grad() { grad.assign(data.size(), 0.0); }
};

/// Named tensors in insertion order.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, std::size_t rows, std::size_t cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor& tensor(std::size_t i) { return entries_[i].second; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].second; }

  std::size_t num_scalars() const;
  void zero_grad();

  /// Versioned text checkpoint. Values are written as hex floats so a
  /// save/load cycle is bit-exact.
  void save(std::ostream& out) const;
  static ParameterSet load(std::istream& in);
  std::string serialize() const;
  void save_file(const std::string& path) const;
  static ParameterSet load_file(const std::string& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

inline constexpr int kCheckpointVersion = 1;

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  std::span<const double> value() const;
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  Var column(std::vector<double> values) {
    const std::size_t n = values.size();
    return constant(n, 1, std::move(values));
  }
  Var zeros(std::size_t rows, std::size_t cols = 1) {
    return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
  }
  /// Leaf bound to a parameter tensor. Repeated calls return the same node.
  Var param(Tensor& t);

  /// Adds g to the upstream gradient of `at` when backward() runs.
  void inject_gradient(Var at, std::span<const double> g);

  void backward(Var loss);
  /// Adds every parameter leaf's gradient into its Tensor::grad.
  void accumulate_param_grads() const;

  std::span<const double> grad(Var v) const;
  void reset();
  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  /// Raise on NaN/Inf as soon as a node is recorded.
  void set_check_finite(bool on) { check_finite_ = on; }

  // Op-implementer interface.
  Var record(std::size_t rows, std::size_t cols, std::vector<double> value, BackwardFn backward);
  std::span<const double> value_of(std::size_t id) const { return nodes_[id].value; }
  std::span<double> grad_of(std::size_t id) { return nodes_[id].grad; }
  std::size_t rows_of(std::size_t id) const { return nodes_[id].rows; }
  std::size_t cols_of(std::size_t id) const { return nodes_[id].cols; }
  void check_owned(Var v) const;

 private:
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<std::size_t, std::vector<double>>> injections_;
  std::unordered_map<Tensor*, std::size_t> param_nodes_;
  bool backward_done_ = false;
  bool check_finite_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Multiplies every entry of v by the 1x1 node s.
Var scale(Var v, Var s);
Var add_n(std::span<const Var> terms);
/// Saturating odd squash onto (-1, 1) (tanh).
Var squash(Var a);
Var sigmoid(Var a);
Var softmax(Var a);
Var log_softmax(Var a);
/// Stacks column blocks vertically.
Var concat(std::span<const Var> parts);
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var pick(Var a, std::size_t index);
/// Elementwise fn in the forward pass, identity in the backward pass.
Var straight_through(Var a, const std::function<double(double)>& fn);

/// Elman step: squash(w_in * x + w_rec * h + b).
Var rnn_cell(Var x, Var h, Var w_in, Var w_rec, Var b);

}  // namespace disem::ad
