#pragma once

#include <functional>
#include <string>
#include <vector>

#include "latcorr/gradkit/dense.hpp"

namespace latcorr::gradkit {

/// Network output at one point with exact input derivatives.
struct JetValue {
  double value = 0.0;
  std::vector<double> d_input;   ///< empty below order 1
  std::vector<double> d2_input;  ///< pure second derivatives; empty below order 2
};

/// Evaluates a scalar-output network at `x` with derivatives up to `order`.
JetValue eval_with_input_derivs(const DenseNet& net, const ParamVector& params,
                                const std::vector<double>& x, int order);

/// Scalar (1x1) objective recorded on a tape from bound parameters.
using Objective = std::function<Var(Tape&, const BoundParams&)>;

struct GradResult {
  double value = 0.0;
  Vector gradient;
};

/// Exact gradient of `objective` with respect to every parameter.
GradResult grad_params(const Objective& objective, const ParamVector& params);
/// Objective value only.
double eval_objective(const Objective& objective, const ParamVector& params);

struct SliceDiscrepancy {
  std::string slice;
  double max_rel = 0.0;  ///< max |analytic - fd| / max(|fd|_inf, |analytic|_inf) over the slice
};

struct FdReport {
  bool pass = true;
  double max_rel = 0.0;
  std::string worst_slice;
  std::vector<SliceDiscrepancy> slices;
};

/// Compares the analytic gradient with central differences of step `step`.
FdReport check_grad_fd(const Objective& objective, const ParamVector& params, double step,
                       double tolerance);
/// Same comparison against a caller-supplied gradient.
FdReport compare_with_fd(const Vector& analytic, const Objective& objective,
                         const ParamVector& params, double step, double tolerance);

}  // namespace latcorr::gradkit
