#include "latcorr/gradkit/tape.hpp"

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ConfigError("Var::scalar on a non-scalar node");
  }
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  bool any = false;
  for (const Var& p : parents) any = any || (p.valid() && nodes_[p.id()].needs_grad);
  nodes_.push_back(Node{std::move(value), Matrix(), any ? std::move(backward) : nullptr, any});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backward backward) {
  bool any = false;
  for (const Var& p : parents) any = any || (p.valid() && nodes_[p.id()].needs_grad);
  nodes_.push_back(Node{std::move(value), Matrix(), any ? std::move(backward) : nullptr, any});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var output) {
  if (&output.tape() != this) throw ConfigError("backward: output belongs to another tape");
  Node& out = nodes_[output.id()];
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw ConfigError("backward: output must be a 1x1 node");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!out.needs_grad) return;
  out.grad = Matrix::Ones(1, 1);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // Interior adjoints are released once pushed to the parents; only
    // leaves keep theirs.
    const Matrix g = std::move(n.grad);
    n.grad.resize(0, 0);
    n.backward(*this, g);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace latcorr::gradkit
