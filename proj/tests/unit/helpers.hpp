#pragma once

#include <random>
#include <vector>

#include "latcorr/model.hpp"

namespace testutil {

using namespace latcorr;

inline ArchConfig tiny_arch(int dim) {
  ArchConfig a;
  a.latent_dim = 2;
  a.width = 5;
  a.hidden_layers = 2;
  a.integral_layers = 1;
  a.quadrature = dim == 1 ? std::vector<int>{7} : std::vector<int>{4, 4};
  a.prior_features = 12;
  a.correction_width = 4;
  a.correction_layers = 2;
  a.variance_width = 3;
  a.viscosity_width = 3;
  a.viscosity_layers = 1;
  return a;
}

inline LatentModel tiny_model(ProblemId id, Scenario sc, ArchConfig arch, bool noise_free = false,
                              std::uint64_t seed = 3) {
  ProblemSpec p = make_problem(id, sc);
  GpPrior prior(arch.latent_dim, arch.prior_features, 0.1 * p.domain.diameter(), p.domain.dim(), seed);
  return LatentModel(p, arch, noise_free, prior);
}

inline std::vector<LatentDraw> draws_for(const GpPrior& prior, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LatentDraw> d;
  for (int i = 0; i < n; ++i) d.push_back(sample_draw(prior, rng));
  return d;
}

inline Matrix random_points(const Domain& dom, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(n, dom.dim());
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < dom.dim(); ++k) x(i, k) = dom.lo[k] + (dom.hi[k] - dom.lo[k]) * u(rng);
  }
  return x;
}

inline std::map<std::string, double> unit_sigma() { return {{"u", 0.3}, {"f", 0.4}, {"b", 0.2}}; }

}  // namespace testutil
