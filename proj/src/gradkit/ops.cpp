#include "latcorr/gradkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {
namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ConfigError("operands recorded on different tapes");
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var cmul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "cmul");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b},
                         [ia, ib](Tape& t, const Matrix& g) {
                           if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                           if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                         });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value() * c, {a},
                         [ia, c](Tape& t, const Matrix& g) { t.accumulate(ia, g * c); });
}

Var shift(Var a, double c) {
  const std::size_t ia = a.id();
  return a.tape().record((a.value().array() + c).matrix(), {a},
                         [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var scale_by(Var a, Var s) {
  require_same_tape(a, s);
  if (s.rows() != 1 || s.cols() != 1) throw ConfigError("scale_by: factor must be 1x1");
  const std::size_t ia = a.id(), is = s.id();
  return a.tape().record(a.value() * s.scalar(), {a, s}, [ia, is](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(is)(0, 0));
    if (t.needs_grad(is)) {
      Matrix gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.value(ia)).sum();
      t.accumulate(is, gs);
    }
  });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimension mismatch");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out;
  out.noalias() = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.cols()) throw ConfigError("matmul_nt: inner dimension mismatch");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw ConfigError("add_row: bad row shape");
  const std::size_t ia = a.id(), ir = row.id();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var add_col(Var a, Var col) {
  require_same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) throw ConfigError("add_col: bad column shape");
  const std::size_t ia = a.id(), ic = col.id();
  Matrix out = a.value();
  out.colwise() += col.value().col(0);
  return a.tape().record(std::move(out), {a, col}, [ia, ic](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ic)) t.accumulate(ic, g.rowwise().sum());
  });
}

Var sub_col(Var a, Var col) {
  require_same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) throw ConfigError("sub_col: bad column shape");
  const std::size_t ia = a.id(), ic = col.id();
  Matrix out = a.value();
  out.colwise() -= col.value().col(0);
  return a.tape().record(std::move(out), {a, col}, [ia, ic](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ic)) t.accumulate(ic, -g.rowwise().sum());
  });
}

Var cmul_col(Var a, Var col) {
  require_same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) throw ConfigError("cmul_col: bad column shape");
  const std::size_t ia = a.id(), ic = col.id();
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return a.tape().record(std::move(out), {a, col}, [ia, ic](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) {
      t.accumulate(ia, (g.array().colwise() * t.value(ic).col(0).array()).matrix());
    }
    if (t.needs_grad(ic)) t.accumulate(ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
  });
}

Var activation(Var a, Activation act, int order) {
  if (order < 0 || order > 2) throw ConfigError("activation: order must be 0..2");
  const std::size_t ia = a.id();
  Matrix out = activate(act, order, a.value().array()).matrix();
  return a.tape().record(std::move(out), {a}, [ia, act, order](Tape& t, const Matrix& g) {
    t.accumulate(ia, (g.array() * activate(act, order + 1, t.value(ia).array())).matrix());
  });
}

std::vector<Var> activation_orders(Var a, Activation act, int count) {
  if (count < 1 || count > 3) throw ConfigError("activation_orders: count must be 1..3");
  const std::size_t ia = a.id();
  const auto table =
      std::make_shared<const std::vector<Eigen::ArrayXXd>>(activate_upto(act, count, a.value().array()));
  std::vector<Var> out;
  for (int k = 0; k < count; ++k) {
    const auto next = static_cast<std::size_t>(k + 1);
    out.push_back(a.tape().record((*table)[static_cast<std::size_t>(k)].matrix(), {a},
                                  [ia, table, next](Tape& t, const Matrix& g) {
                                    t.accumulate(ia, (g.array() * (*table)[next]).matrix());
                                  }));
  }
  return out;
}

Var exp(Var a) {
  const std::size_t ia = a.id();
  const std::size_t ir = a.tape().next_id();
  return a.tape().record(a.value().array().exp().matrix(), {a},
                         [ia, ir](Tape& t, const Matrix& g) {
                           t.accumulate(ia, g.cwiseProduct(t.value(ir)));
                         });
}

Var log(Var a, double floor) {
  const std::size_t ia = a.id();
  Matrix out = a.value().array().max(floor).log().matrix();
  return a.tape().record(std::move(out), {a}, [ia, floor](Tape& t, const Matrix& g) {
    const auto& x = t.value(ia).array();
    t.accumulate(ia, (g.array() * (x > floor).cast<double>() / x.max(floor)).matrix());
  });
}

Var square(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value().array().square().matrix(), {a},
                         [ia](Tape& t, const Matrix& g) {
                           t.accumulate(ia, 2.0 * g.cwiseProduct(t.value(ia)));
                         });
}

Var cos(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value().array().cos().matrix(), {a}, [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, -g.cwiseProduct(t.value(ia).array().sin().matrix()));
  });
}

Var clamp(Var a, double lo, double hi) {
  const std::size_t ia = a.id();
  Matrix out = a.value().array().max(lo).min(hi).matrix();
  return a.tape().record(std::move(out), {a}, [ia, lo, hi](Tape& t, const Matrix& g) {
    const auto& x = t.value(ia).array();
    t.accumulate(ia, (g.array() * ((x > lo) && (x < hi)).cast<double>()).matrix());
  });
}

Var sum(Var a) {
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [ia, r, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ConfigError("mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  const std::size_t ia = a.id();
  const Index c = a.cols();
  return a.tape().record(a.value().rowwise().sum(), {a}, [ia, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.col(0).replicate(1, c));
  });
}

Var row_softmax(Var a) {
  const std::size_t ia = a.id();
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  const std::size_t ir = a.tape().next_id();
  return a.tape().record(std::move(out), {a}, [ia, ir](Tape& t, const Matrix& g) {
    const Matrix& w = t.value(ir);
    const Eigen::VectorXd dot = g.cwiseProduct(w).rowwise().sum();
    Matrix ga = g;
    ga.colwise() -= dot;
    t.accumulate(ia, ga.cwiseProduct(w));
  });
}

Var tile_rows(Var a, Index reps) {
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.tape().record(a.value().replicate(reps, 1), {a},
                         [ia, r, c, reps](Tape& t, const Matrix& g) {
                           Matrix acc = Matrix::Zero(r, c);
                           for (Index k = 0; k < reps; ++k) acc += g.middleRows(k * r, r);
                           t.accumulate(ia, acc);
                         });
}

Var repeat_rows(Var a, Index reps) {
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix out(r * reps, c);
  for (Index i = 0; i < r; ++i) out.middleRows(i * reps, reps) = a.value().row(i).replicate(reps, 1);
  return a.tape().record(std::move(out), {a}, [ia, r, c, reps](Tape& t, const Matrix& g) {
    Matrix acc(r, c);
    for (Index i = 0; i < r; ++i) acc.row(i) = g.middleRows(i * reps, reps).colwise().sum();
    t.accumulate(ia, acc);
  });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ConfigError("slice_rows: out of range");
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.tape().record(a.value().middleRows(start, count), {a},
                         [ia, r, c, start, count](Tape& t, const Matrix& g) {
                           Matrix acc = Matrix::Zero(r, c);
                           acc.middleRows(start, count) = g;
                           t.accumulate(ia, acc);
                         });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("vcat: no parts");
  const Index c = parts.front().cols();
  Index total = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) throw ConfigError("vcat: column mismatch");
    require_same_tape(p, parts.front());
    total += p.rows();
  }
  Matrix out(total, c);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    off += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts, [spans](Tape& t, const Matrix& g) {
    Index o = 0;
    for (const auto& [id, n] : spans) {
      if (t.needs_grad(id)) t.accumulate(id, g.middleRows(o, n));
      o += n;
    }
  });
}

Var col_blocks_to_rows(Var a, Index blocks) {
  if (blocks <= 0 || a.cols() % blocks != 0) throw ConfigError("col_blocks_to_rows: bad block count");
  const std::size_t ia = a.id();
  const Index p = a.rows(), n = a.cols() / blocks;
  Matrix out(p * blocks, n);
  for (Index b = 0; b < blocks; ++b) out.middleRows(b * p, p) = a.value().middleCols(b * n, n);
  return a.tape().record(std::move(out), {a}, [ia, p, n, blocks](Tape& t, const Matrix& g) {
    Matrix acc(p, n * blocks);
    for (Index b = 0; b < blocks; ++b) acc.middleCols(b * n, n) = g.middleRows(b * p, p);
    t.accumulate(ia, acc);
  });
}

Var row_blocks_to_cols(Var a, Index blocks) {
  if (blocks <= 0 || a.rows() % blocks != 0) throw ConfigError("row_blocks_to_cols: bad block count");
  const std::size_t ia = a.id();
  const Index p = a.rows() / blocks, n = a.cols();
  Matrix out(p, n * blocks);
  for (Index b = 0; b < blocks; ++b) out.middleCols(b * n, n) = a.value().middleRows(b * p, p);
  return a.tape().record(std::move(out), {a}, [ia, p, n, blocks](Tape& t, const Matrix& g) {
    Matrix acc(p * blocks, n);
    for (Index b = 0; b < blocks; ++b) acc.middleRows(b * p, p) = g.middleCols(b * n, n);
    t.accumulate(ia, acc);
  });
}

}  // namespace latcorr::gradkit
