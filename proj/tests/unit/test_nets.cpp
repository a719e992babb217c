#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "latcorr/errors.hpp"

using namespace latcorr;
using namespace testutil;
namespace gk = latcorr::gradkit;

namespace {

void set_output(const DenseNet& net, ParamVector& p, double bias) {
  const int last = net.layer_count() - 1;
  p.matrix(net.weight_name(last)).setZero();
  p.matrix(net.bias_name(last)).setConstant(bias);
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("encoder gate limits and hand-evaluated mix") {
  Encoder enc(1, 3, 4, 1, Activation::Mish);
  enc.clamp = false;
  ParamLayout layout;
  enc.add_to(layout);
  ParamVector p(layout);
  std::mt19937_64 rng(1);
  enc.init(p, rng);
  Matrix x(4, 1);
  x << 0.1, 0.3, 0.6, 0.95;
  const Matrix z0v = random_matrix(8, 3, 5);

  auto run = [&](const ParamVector& params, const Matrix& z0) {
    Tape tape;
    BoundParams bp(tape, params);
    const EncodedField e = enc.features(Jet::input(tape, x, DerivSpec::none(1)), bp);
    const Jet z1 = mix_latent(e, Jet::plain(tape.constant(z0), 1), 2);
    return std::make_tuple(Matrix(z1.value.value()), Matrix(e.zbar.value.value()), Matrix(e.m.value.value()));
  };

  set_output(enc.confidence, p, 50.0);
  {
    const auto [z1, zbar, m] = run(p, z0v);
    CHECK(z1 == zbar.replicate(2, 1));
  }
  set_output(enc.confidence, p, -50.0);
  {
    const auto [z1, zbar, m] = run(p, z0v);
    CHECK((z1 - z0v).cwiseAbs().maxCoeff() <= 1e-15);
  }
  // Scalar case: m = 0.5, zbar = 2, z0 = -1 gives 0.5.
  Encoder one(1, 1, 3, 1, Activation::Tanh);
  ParamLayout l1;
  one.add_to(l1);
  ParamVector p1(l1);
  one.init(p1, rng);
  set_output(one.confidence, p1, 0.0);
  set_output(one.zbar, p1, 2.0);
  Tape tape;
  BoundParams bp(tape, p1);
  const EncodedField e = one.features(Jet::input(tape, Matrix::Constant(1, 1, 0.4), DerivSpec::none(1)), bp);
  const Jet z1 = mix_latent(e, Jet::plain(tape.constant(Matrix::Constant(1, 1, -1.0)), 1), 1);
  CHECK(z1.value.scalar() == doctest::Approx(0.5).epsilon(1e-15));

  // Clamped gate never saturates.
  Encoder clamped = enc;
  clamped.clamp = true;
  set_output(clamped.confidence, p, 50.0);
  Tape t2;
  BoundParams bp2(t2, p);
  const Matrix m = clamped.features(Jet::input(t2, x, DerivSpec::none(1)), bp2).m.value.value();
  CHECK((m.array() == 1.0 - kConfidenceFloor).all());
}

TEST_CASE("encoder output is affine in zbar and z0 with coefficients m and 1-m") {
  Encoder enc(2, 3, 6, 2, Activation::Mish);
  ParamLayout layout;
  enc.add_to(layout);
  ParamVector p(layout);
  std::mt19937_64 rng(9);
  enc.init(p, rng);
  const Matrix x = random_matrix(5, 2, 2);
  const Matrix za = random_matrix(15, 3, 3);
  const Matrix zb = random_matrix(15, 3, 4);
  Tape tape;
  BoundParams bp(tape, p);
  const EncodedField e = enc.features(Jet::input(tape, x, DerivSpec::none(2)), bp);
  auto z1 = [&](const Matrix& z0) { return Matrix(mix_latent(e, Jet::plain(tape.constant(z0), 2), 3).value.value()); };
  const Matrix m = e.m.value.value().replicate(3, 1);
  const Matrix zbar = e.zbar.value.value().replicate(3, 1);
  const Matrix expect = (m.array() * zbar.array() + (1.0 - m.array()) * za.array()).matrix();
  CHECK((z1(za) - expect).cwiseAbs().maxCoeff() <= 1e-14);
  // superposition in z0 at fixed m
  const Matrix lhs = z1(za + 2.0 * zb) - z1(za);
  const Matrix rhs = 2.0 * ((1.0 - m.array()) * zb.array()).matrix();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("quadrature weights are normalized with exact query derivatives") {
  for (int dim : {1, 2}) {
    const Matrix nodes = random_matrix(9, dim, 11 + dim);
    const Matrix q = random_matrix(6, dim, 21 + dim);
    for (double alpha : {0.1, 2.0, 12.5, 300.0}) {
      Tape tape;
      const Var a = tape.constant(Matrix::Constant(1, 1, alpha));
      const Jet w = quadrature_weights(tape, q, DerivSpec::up_to(dim, 2), nodes, a);
      const Matrix& wv = w.value.value();
      CHECK((wv.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
      CHECK((wv.array() >= 0.0).all());
      for (int k = 0; k < dim; ++k) {
        CHECK(w.d[k].value().rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, alpha));
        const double h = 1e-4 / std::sqrt(1.0 + alpha);
        Matrix qp = q, qm = q;
        qp.col(k).array() += h;
        qm.col(k).array() -= h;
        Tape t2;
        const Var a2 = t2.constant(Matrix::Constant(1, 1, alpha));
        const Matrix wp = quadrature_weights(t2, qp, DerivSpec::none(dim), nodes, a2).value.value();
        const Matrix wm = quadrature_weights(t2, qm, DerivSpec::none(dim), nodes, a2).value.value();
        const Matrix d1 = (wp - wm) / (2 * h);
        const Matrix d2 = (wp - 2 * wv + wm) / (h * h);
        const double s1 = std::max(1.0, d1.cwiseAbs().maxCoeff());
        const double s2 = std::max(1.0, d2.cwiseAbs().maxCoeff());
        INFO("dim " << dim << " alpha " << alpha << " k " << k);
        CHECK((w.d[k].value() - d1).cwiseAbs().maxCoeff() <= 1e-6 * s1);
        CHECK((w.d2[k].value() - d2).cwiseAbs().maxCoeff() <= 1e-4 * s2);
      }
    }
  }
}

TEST_CASE("large kernel concentration selects the coincident node") {
  Matrix nodes(5, 1);
  nodes << 0.0, 0.25, 0.5, 0.75, 1.0;
  Tape tape;
  const Var a = tape.constant(Matrix::Constant(1, 1, 1e6));
  const Matrix w = quadrature_weights(tape, Matrix::Constant(1, 1, 0.5), DerivSpec::none(1), nodes, a).value.value();
  CHECK(w(0, 2) >= 1.0 - 1e-6);
  CHECK(w.maxCoeff() == w(0, 2));
  CHECK_THROWS_AS(quadrature_weights(tape, Matrix::Constant(1, 1, 0.5), DerivSpec::none(1), Matrix(0, 1), a),
                  ConfigError);
}

TEST_CASE("constant latent field gives a query-independent integral term") {
  const Matrix nodes = random_matrix(10, 2, 1);
  const Matrix q = random_matrix(7, 2, 2);
  Eigen::RowVectorXd c(3);
  c << 0.4, -1.2, 2.5;
  Tape tape;
  const Jet w = quadrature_weights(tape, q, DerivSpec::up_to(2, 2), nodes, tape.constant(Matrix::Constant(1, 1, 3.0)));
  const Jet t = integral_term(w, tape.constant(c.replicate(20, 1)), 2);
  CHECK((t.value.value() - c.replicate(14, 1)).cwiseAbs().maxCoeff() <= 1e-13);
  for (int k = 0; k < 2; ++k) {
    CHECK(t.d[k].value().cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(t.d2[k].value().cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("integral nets are invariant to the ordering of quadrature nodes") {
  for (int layers : {1, 2}) {
    IntegralNet net{"op", 3, 6, layers, 1, 1, Activation::Mish};
    ParamLayout layout;
    net.add_to(layout);
    ParamVector p(layout);
    std::mt19937_64 rng(4);
    net.init(p, rng, 0.3);
    const Index nq = 8, draws = 2;
    const Matrix nodes = random_matrix(nq, 1, 7);
    const Matrix q = random_matrix(5, 1, 8);
    const Matrix zq = random_matrix(draws * 5, 3, 9);
    const Matrix zn = random_matrix(draws * nq, 3, 10);
    std::vector<Index> perm(nq);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix nodes_p(nq, 1), zn_p(draws * nq, 3);
    for (Index i = 0; i < nq; ++i) {
      nodes_p.row(i) = nodes.row(perm[i]);
      for (Index j = 0; j < draws; ++j) zn_p.row(j * nq + i) = zn.row(j * nq + perm[i]);
    }
    auto eval = [&](const Matrix& nd, const Matrix& field) {
      Tape tape;
      BoundParams bp(tape, p);
      std::vector<Jet> qw;
      std::vector<Var> nw;
      for (int i = 0; i < layers; ++i) {
        qw.push_back(quadrature_weights(tape, q, DerivSpec::none(1), nd, net.alpha(bp, i)));
        nw.push_back(quadrature_weights(tape, nd, DerivSpec::none(1), nd, net.alpha(bp, i)).value);
      }
      return Matrix(net.forward(Jet::plain(tape.constant(zq), 1), qw, tape.constant(field), nw, draws, bp).value.value());
    };
    CHECK((eval(nodes, zn) - eval(nodes_p, zn_p)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("model input derivatives agree with finite differences through the integral decoder") {
  struct Case {
    ProblemId id;
    Scenario sc;
  };
  for (const Case c : {Case{ProblemId::Channel, Scenario::ChannelCorrected},
                       Case{ProblemId::ReactionDiffusion, Scenario::S3}}) {
    ArchConfig arch = tiny_arch(c.id == ProblemId::Channel ? 1 : 2);
    arch.integral_layers = 2;
    arch.hidden_layers = 3;
    const LatentModel model = tiny_model(c.id, c.sc, arch);
    const ParamVector p = model.init(5, unit_sigma());
    const auto draws = draws_for(model.prior(), 2, 6);
    const Matrix x = random_points(model.problem().domain, 3, 7);
    const int dim = model.problem().domain.dim();
    auto values = [&](const Matrix& pts) {
      Tape tape;
      BoundParams bp(tape, p);
      const DrawContext ctx = model.begin(tape, bp, draws, Matrix::Zero(2, 1));
      const PathFeatures feats(model.prior(), pts, model.spec_for(false));
      return Matrix(model.evaluate(ctx, pts, feats, false).u.value.value());
    };
    Tape keep;
    Jet jet = Jet::plain(Var(), dim);
    // copy derivative channels onto a tape that outlives the evaluation
    {
      Tape tape;
      BoundParams bp(tape, p);
      const DrawContext ctx = model.begin(tape, bp, draws, Matrix::Zero(2, 1));
      const PathFeatures feats(model.prior(), x, model.spec_for(true));
      const Evaluation ev = model.evaluate(ctx, x, feats, true);
      for (int k = 0; k < dim; ++k) {
        if (ev.u.has_d(k)) jet.d[k] = keep.constant(ev.u.d[k].value());
        if (ev.u.has_d2(k)) jet.d2[k] = keep.constant(ev.u.d2[k].value());
      }
    }
    const Matrix u0 = values(x);
    const double h = 1e-4;
    for (int k = 0; k < dim; ++k) {
      Matrix xp = x, xm = x;
      xp.col(k).array() += h;
      xm.col(k).array() -= h;
      const Matrix up = values(xp), um = values(xm);
      const Matrix d1 = (up - um) / (2 * h);
      const Matrix d2 = (up - 2 * u0 + um) / (h * h);
      INFO("problem " << to_string(c.id) << " coord " << k);
      if (jet.has_d(k)) {
        CHECK((jet.d[k].value() - d1).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, d1.cwiseAbs().maxCoeff()));
      }
      if (jet.has_d2(k)) {
        CHECK((jet.d2[k].value() - d2).cwiseAbs().maxCoeff() <= 1e-4 * std::max(1.0, d2.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("parameter gradients through operator residuals agree with finite differences") {
  struct Case {
    ProblemId id;
    Scenario sc;
    CorrectionVariant variant;
  };
  for (const Case c : {Case{ProblemId::Ode, Scenario::S1, CorrectionVariant::Pointwise},
                       Case{ProblemId::Ode, Scenario::S3, CorrectionVariant::Integral},
                       Case{ProblemId::ReactionDiffusion, Scenario::S3, CorrectionVariant::Pointwise},
                       Case{ProblemId::Channel, Scenario::ChannelLearnedViscosity, CorrectionVariant::Pointwise},
                       Case{ProblemId::Channel, Scenario::ChannelNewtonian, CorrectionVariant::Pointwise}}) {
    ArchConfig arch = tiny_arch(c.id == ProblemId::ReactionDiffusion ? 2 : 1);
    arch.correction_variant = c.variant;
    arch.integral_layers = c.variant == CorrectionVariant::Integral ? 2 : 1;
    const LatentModel model = tiny_model(c.id, c.sc, arch);
    const ParamVector p = model.init(8, unit_sigma());
    const auto draws = draws_for(model.prior(), 2, 9);
    const Matrix x = random_points(model.problem().domain, 3, 10);
    const PathFeatures feats(model.prior(), x, model.spec_for(true));
    Matrix eps(2, 1);
    eps << 0.3, -1.1;
    const gk::Objective obj = [&](Tape& tape, const BoundParams& bp) {
      const DrawContext ctx = model.begin(tape, bp, draws, eps);
      const Evaluation ev = model.evaluate(ctx, x, feats, true);
      return gk::add(gk::mean(gk::square(ev.f)), gk::add(gk::mean(gk::square(ev.u.value)), gk::mean(ev.phi)));
    };
    const gk::FdReport rep = gk::check_grad_fd(obj, p, 1e-6, 1e-4);
    INFO(to_string(c.sc) << " worst " << rep.worst_slice << " " << rep.max_rel);
    CHECK(rep.pass);
  }
}

TEST_CASE("correction decoder properties") {
  // zero output layer: s vanishes for every draw
  for (auto variant : {CorrectionVariant::Pointwise, CorrectionVariant::Integral}) {
    ArchConfig arch = tiny_arch(1);
    arch.correction_variant = variant;
    const LatentModel model = tiny_model(ProblemId::Ode, Scenario::S3, arch);
    ParamVector p = model.init(2, unit_sigma());
    model.correction()->zero_output(p);
    const auto draws = draws_for(model.prior(), 4, 1);
    const Matrix x = random_points(model.problem().domain, 6, 2);
    Tape tape;
    BoundParams bp(tape, p);
    const DrawContext ctx = model.begin(tape, bp, draws, Matrix::Zero(4, 1));
    const Evaluation ev = model.evaluate(ctx, x, PathFeatures(model.prior(), x, model.spec_for(true)), true);
    CHECK(ev.s.value().isZero(0.0));
    // phi reduces to the base reaction 0.2 cos(u)
    const Matrix base = 0.2 * ev.u.value.value().array().cos().matrix();
    CHECK((ev.phi.value() - base).cwiseAbs().maxCoeff() == 0.0);
  }

  // pointwise: identical latent inputs give identical outputs
  const Correction pw = Correction::pointwise(3, 5, 2, Activation::Tanh);
  ParamLayout l;
  pw.add_to(l);
  ParamVector p(l);
  std::mt19937_64 rng(3);
  pw.init(p, rng, 0.2);
  Matrix z = random_matrix(4, 3, 4);
  z.row(3) = z.row(1);
  Tape tape;
  BoundParams bp(tape, p);
  const Matrix s = pw.pointwise_forward(tape.constant(z), bp).value();
  CHECK(s(3, 0) == s(1, 0));
  CHECK(s(0, 0) != s(1, 0));

  // integral variant: s(x) responds to the latent value at a far node
  const Correction ic = Correction::integral_operator(2, 5, 2, Activation::Tanh);
  ParamLayout li;
  ic.add_to(li);
  ParamVector pi(li);
  ic.init(pi, rng, 0.2);
  Matrix nodes(6, 1);
  nodes << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
  const Matrix zq = random_matrix(1, 2, 6);
  const Matrix zn = random_matrix(6, 2, 7);
  auto s_at = [&](const Matrix& field, Matrix* grad) {
    Tape t;
    BoundParams b(t, pi);
    const Var nf = t.variable(field);
    const Jet w = quadrature_weights(t, Matrix::Constant(1, 1, 0.0), DerivSpec::none(1), nodes, ic.integral.alpha(b, 0));
    const Var out = ic.integral.forward(Jet::plain(t.constant(zq), 1), {w}, nf, {}, 1, b).value;
    if (grad != nullptr) {
      t.backward(gk::sum(out));
      *grad = t.grad(nf);
    }
    return out.scalar();
  };
  Matrix g;
  const double s0 = s_at(zn, &g);
  const double h = 1e-3;
  Matrix zp = zn;
  zp(5, 0) += h;
  const double fd = (s_at(zp, nullptr) - s0) / h;
  CHECK(std::abs(g(5, 0)) > 0.0);
  CHECK(fd != 0.0);
  CHECK(g(5, 0) == doctest::Approx(fd).epsilon(1e-3));
}

TEST_CASE("variance heads are positive softplus maps") {
  VarianceHeads heads(VarianceMode::Constant, 1, 4);
  ParamLayout l;
  heads.add_to(l);
  ParamVector p(l);
  Tape tape;
  BoundParams bp(tape, p);
  const Matrix x = random_matrix(5, 1, 1);
  const Matrix s = heads.sigma("u", tape, x, bp).value();
  CHECK((s.array() == s(0, 0)).all());
  CHECK(s(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(s(0, 0) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK_THROWS_AS((void)heads.sigma("q", tape, x, bp), ConfigError);
  CHECK(heads.owns("sigma_f.raw"));
  CHECK_FALSE(heads.owns("dec.W0"));

  VarianceHeads mlp(VarianceMode::Mlp, 2, 6);
  ParamLayout lm;
  mlp.add_to(lm);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 5.0);
  const Matrix pts = random_matrix(40, 2, 3);
  double lowest = 1.0;
  for (int trial = 0; trial < 25; ++trial) {
    ParamVector pm(lm);
    for (Index i = 0; i < pm.size(); ++i) pm.values()[i] = n(rng);
    Tape t;
    BoundParams b(t, pm);
    for (const char* q : {"u", "f", "b"}) lowest = std::min(lowest, mlp.sigma(q, t, pts, b).value().minCoeff());
  }
  CHECK(lowest > 0.0);  // 25 x 3 x 40 = 3000 evaluations

  ParamVector pm(lm);
  mlp.init(pm, rng, {{"u", 0.01}, {"f", 0.05}, {"b", 0.02}});
  Tape t;
  BoundParams b(t, pm);
  CHECK((mlp.sigma("f", t, pts, b).value().array() - 0.05).abs().maxCoeff() <= 1e-12);
  CHECK(softplus(softplus_inverse(0.37)) == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("solution-mean correction realizes the corrected operator literally") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ArchConfig arch = tiny_arch(1);
    arch.correction_input = CorrectionInput::SolutionMean;
    const LatentModel model = tiny_model(ProblemId::Ode, Scenario::S3, arch, false, seed);
    const ParamVector p = model.init(seed, unit_sigma());
    const auto draws = draws_for(model.prior(), 3, seed);
    const Matrix x = random_points(model.problem().domain, 5, seed);
    Tape tape;
    BoundParams bp(tape, p);
    const DrawContext ctx = model.begin(tape, bp, draws, Matrix::Zero(3, 1));
    const Evaluation ev = model.evaluate(ctx, x, PathFeatures(model.prior(), x, model.spec_for(true)), true);
    // C[v](x) = S(v(x)) applied to the decoded mean
    const Matrix c = model.correction()->mlp.forward(Jet::plain(tape.constant(ev.u.value.value()), 0), bp).value.value();
    const Matrix expect = ev.residual.value() - c;
    CHECK((ev.f.value() - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("model evaluation is bit-for-bit deterministic") {
  const LatentModel model = tiny_model(ProblemId::ReactionDiffusion, Scenario::S1, tiny_arch(2));
  const ParamVector p = model.init(1, unit_sigma());
  const auto draws = draws_for(model.prior(), 3, 2);
  const Matrix x = random_points(model.problem().domain, 4, 3);
  Matrix eps(3, 1);
  eps << 0.1, 0.2, -0.3;
  auto run = [&]() {
    Tape tape;
    BoundParams bp(tape, p);
    const DrawContext ctx = model.begin(tape, bp, draws, eps);
    const Evaluation ev = model.evaluate(ctx, x, PathFeatures(model.prior(), x, model.spec_for(true)), true);
    return std::make_pair(Matrix(ev.f.value()), Matrix(ev.u.value.value()));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
