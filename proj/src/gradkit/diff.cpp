#include "latcorr/gradkit/diff.hpp"

#include <algorithm>
#include <cmath>

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {

JetValue eval_with_input_derivs(const DenseNet& net, const ParamVector& params,
                                const std::vector<double>& x, int order) {
  if (order < 0 || order > 2) throw ConfigError("eval_with_input_derivs: order must be 0..2");
  if (static_cast<int>(x.size()) != net.in_dim) throw ConfigError("eval_with_input_derivs: bad point");
  if (net.out_dim != 1) throw ConfigError("eval_with_input_derivs: network output must be scalar");
  Tape tape;
  BoundParams p(tape, params, [](const std::string&) { return true; });
  Matrix coords(1, net.in_dim);
  for (int k = 0; k < net.in_dim; ++k) coords(0, k) = x[k];
  const Jet out = net.forward(Jet::input(tape, coords, DerivSpec::up_to(net.in_dim, order)), p);
  JetValue r;
  r.value = out.value.value()(0, 0);
  if (order >= 1) {
    for (int k = 0; k < net.in_dim; ++k) r.d_input.push_back(out.d[k].value()(0, 0));
  }
  if (order >= 2) {
    for (int k = 0; k < net.in_dim; ++k) r.d2_input.push_back(out.d2[k].value()(0, 0));
  }
  return r;
}

GradResult grad_params(const Objective& objective, const ParamVector& params) {
  Tape tape;
  BoundParams p(tape, params);
  const Var out = objective(tape, p);
  GradResult r;
  r.value = out.scalar();
  if (!std::isfinite(r.value)) throw NumericError("objective evaluated to a non-finite value");
  tape.backward(out);
  r.gradient = p.gradient();
  if (!r.gradient.allFinite()) throw NumericError("non-finite gradient");
  return r;
}

double eval_objective(const Objective& objective, const ParamVector& params) {
  Tape tape;
  BoundParams p(tape, params, [](const std::string&) { return true; });
  const double v = objective(tape, p).scalar();
  if (!std::isfinite(v)) throw NumericError("objective evaluated to a non-finite value");
  return v;
}

FdReport check_grad_fd(const Objective& objective, const ParamVector& params, double step,
                       double tolerance) {
  return compare_with_fd(grad_params(objective, params).gradient, objective, params, step, tolerance);
}

FdReport compare_with_fd(const Vector& analytic, const Objective& objective,
                         const ParamVector& params, double step, double tolerance) {
  if (!(step > 0.0)) throw ConfigError("check_grad_fd: step must be positive");
  if (analytic.size() != params.size()) throw ConfigError("check_grad_fd: gradient size mismatch");
  ParamVector probe = params;
  Vector fd(params.size());
  for (Index i = 0; i < params.size(); ++i) {
    const double x0 = probe.values()[i];
    probe.values()[i] = x0 + step;
    const double fp = eval_objective(objective, probe);
    probe.values()[i] = x0 - step;
    const double fm = eval_objective(objective, probe);
    probe.values()[i] = x0;
    fd[i] = (fp - fm) / (2.0 * step);
  }
  FdReport report;
  for (const Slice& s : params.layout().slices()) {
    const auto a = analytic.segment(s.offset, s.size());
    const auto n = fd.segment(s.offset, s.size());
    const double denom = std::max({a.lpNorm<Eigen::Infinity>(), n.lpNorm<Eigen::Infinity>(), 1e-10});
    const double rel = (a - n).lpNorm<Eigen::Infinity>() / denom;
    report.slices.push_back({s.name, rel});
    if (report.worst_slice.empty() || rel > report.max_rel) {
      report.max_rel = rel;
      report.worst_slice = s.name;
    }
  }
  report.pass = report.max_rel <= tolerance;
  return report;
}

}  // namespace latcorr::gradkit
