#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

namespace latcorr::gradkit {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

/// Handle to a matrix-valued node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }
  [[nodiscard]] Tape& tape() const noexcept { return *tape_; }
  [[nodiscard]] std::size_t id() const noexcept { return id_; }

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Index rows() const { return value().rows(); }
  [[nodiscard]] Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  [[nodiscard]] double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape over dense matrices.
///
/// Every recorded node keeps its forward value; nodes that depend on a
/// variable also keep a closure that pushes the incoming adjoint to their
/// parents. Only first-order reverse sweeps are supported: higher input
/// derivatives are carried forward explicitly as jet channels (see jet.hpp),
/// so a reverse sweep over a jet computation yields exact mixed
/// parameter/input derivatives.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Records an op result. `backward` is dropped when no parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var record(Matrix value, const std::vector<Var>& parents, Backward backward);

  [[nodiscard]] bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  [[nodiscard]] bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad.noalias() += g;
    }
  }

  /// Seeds d(output)/d(output) = 1 for a 1x1 output and sweeps backwards.
  void backward(Var output);
  /// Adjoint of `v` after backward(); zeros when `v` received nothing.
  [[nodiscard]] Matrix grad(Var v) const;

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  /// Id the next recorded node will receive; lets a closure refer to its own output.
  [[nodiscard]] std::size_t next_id() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
};

}  // namespace latcorr::gradkit
