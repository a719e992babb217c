#pragma once

#include <vector>

#include "latcorr/gradkit/activation.hpp"
#include "latcorr/gradkit/tape.hpp"

namespace latcorr::gradkit {

// Elementwise arithmetic. Shapes must agree exactly.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var shift(Var a, double c);
/// a * s for a 1x1 node s.
Var scale_by(Var a, Var s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator*(double c, Var a) { return scale(a, c); }

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);

/// Broadcasts a 1xn row over every row of a.
Var add_row(Var a, Var row);
/// Broadcasts a Px1 column over every column of a.
Var add_col(Var a, Var col);
Var sub_col(Var a, Var col);
Var cmul_col(Var a, Var col);

/// k-th derivative of an activation, applied elementwise.
Var activation(Var a, Activation act, int order = 0);
/// Nodes for derivative orders 0..count-1 of one pre-activation; the
/// derivative tables are evaluated once and shared with the backward pass.
std::vector<Var> activation_orders(Var a, Activation act, int count);
Var exp(Var a);
/// log(max(a, floor)); the floor keeps log-likelihoods finite.
Var log(Var a, double floor = 1e-300);
Var square(Var a);
Var cos(Var a);
/// Clamps to [lo, hi]; the gradient is zero where the clamp is active.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
/// Px1 vector of row sums.
Var row_sum(Var a);
/// Row-wise softmax.
Var row_softmax(Var a);

/// Stacks `reps` copies of a vertically.
Var tile_rows(Var a, Index reps);
/// Repeats every row of a `reps` times consecutively.
Var repeat_rows(Var a, Index reps);
Var slice_rows(Var a, Index start, Index count);
Var vcat(const std::vector<Var>& parts);
/// P x (B*n) -> (B*P) x n, column block b becoming row block b.
Var col_blocks_to_rows(Var a, Index blocks);
/// (B*P) x n -> P x (B*n); inverse of col_blocks_to_rows.
Var row_blocks_to_cols(Var a, Index blocks);

}  // namespace latcorr::gradkit
