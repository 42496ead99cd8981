#include "stokes_homog/effective_tensor.hpp"

#include <Eigen/Dense>

namespace stokes_homog {

EffectiveTensor compute_effective(const CoefficientField& a, const CorrectorSet& set) {
  const int d = a.dim();
  if (d != set.grid.d) throw ValidationError("compute_effective: dimension mismatch");
  double max_res = 0.0;
  for (double r : set.momentum_residual) max_res = std::max(max_res, r);
  if (max_res > 1e-8)
    throw ValidationError("compute_effective: corrector residual exceeds 1e-8");

  GridDesc g(set.grid);
  DiscreteOperator op(g, [&a](const Vec& x) { return a.evaluate(x); });
  const GradientSampling& samp = op.sampling();

  // Gradient samples of chi_j^b + P_j^b for all (j,b).
  std::vector<Eigen::VectorXd> grads(d * d);
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      std::array<double, 9> e{};
      e[j * d + b] = 1.0;
      grads[j * d + b] =
          op.gradient_samples(set.chi[set.index(j, b)]) + samp.affine_samples(e.data());
    }

  EffectiveTensor hat;
  hat.d = d;
  hat.entries = Tensor(d);
  hat.grid_n = set.grid.n;
  hat.max_corrector_residual = max_res;

  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      Eigen::VectorXd ws = op.W() * grads[j * d + b];
      for (int i = 0; i < d; ++i)
        for (int al = 0; al < d; ++al)
          hat.entries(i, j, al, b) = grads[i * d + al].dot(ws);
    }

  EffectiveEllipticityReport rep = check_effective_ellipticity(hat, 0.0);
  hat.mu_eff_lower = rep.mu_eff_lower;
  hat.mu_eff_upper = rep.mu_eff_upper;
  return hat;
}

double check_duality(const CoefficientField& a, const PeriodicGrid& grid, double tol) {
  CorrectorSet primal = solve_cell_problems(a, grid, tol);
  CorrectorSet adj_set = solve_adjoint_cell_problems(a, grid, tol);

  EffectiveTensor hat = compute_effective(a, primal);
  CoefficientField a_adj(a.dim(), a.mu(), a.spec(),
                         [a](const Vec& y) { return a.evaluate(y).adjoint(); }, a.holder());
  EffectiveTensor hat_adj = compute_effective(a_adj, adj_set);

  Tensor lhs = hat.entries.adjoint();
  const int d = a.dim();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int al = 0; al < d; ++al)
        for (int b = 0; b < d; ++b)
          worst = std::max(worst,
                           std::abs(lhs(i, j, al, b) - hat_adj.entries(i, j, al, b)));
  return worst;
}

EffectiveEllipticityReport check_effective_ellipticity(const EffectiveTensor& hat,
                                                       double mu_input, double tol) {
  const int d = hat.d;
  Eigen::MatrixXd m(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int al = 0; al < d; ++al)
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < d; ++b) m(i * d + al, j * d + b) = hat.entries(i, j, al, b);
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);

  EffectiveEllipticityReport rep;
  rep.mu_eff_lower = es.eigenvalues().minCoeff();
  rep.mu_eff_upper = es.eigenvalues().maxCoeff();
  rep.pass = rep.mu_eff_lower >= mu_input - tol && std::isfinite(rep.mu_eff_upper);
  return rep;
}

}  // namespace stokes_homog
