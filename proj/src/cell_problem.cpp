#include "stokes_homog/cell_problem.hpp"

namespace stokes_homog {

GridVelocity CorrectorSet::linear_field(int j, int b) const {
  GridVelocity out{GridDesc(grid)};
  out.fill_from([&](int comp, const Vec& x) { return comp == b ? x[j] : 0.0; });
  return out;
}

namespace {

CorrectorSet solve_impl(const CoefficientField& a, const PeriodicGrid& grid, double tol,
                        SaddleOptions::Method method) {
  const int d = grid.d;
  GridDesc g(grid);
  auto op = std::make_shared<DiscreteOperator>(
      g, [&a](const Vec& x) { return a.evaluate(x); });
  StokesLinearSystem system(op);

  double hd = 1.0;
  for (int k = 0; k < d; ++k) hd *= g.h();

  SaddleOptions opt;
  opt.rel_tol = tol;
  opt.method = method;

  CorrectorSet set;
  set.grid = grid;
  set.field = a;
  set.tol = tol;
  set.chi.resize(d * d, GridVelocity(g));
  set.pressure.resize(d * d, GridPressure(g));
  set.momentum_residual.assign(d * d, 0.0);
  set.rhs_norm.assign(d * d, 0.0);
  set.divergence_defect.assign(d * d, 0.0);
  set.chi_h1.assign(d * d, 0.0);
  set.pi_l2.assign(d * d, 0.0);

  GridPressure zero_div(g);
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      std::array<double, 9> e{};
      e[j * d + b] = 1.0;
      Eigen::VectorXd load = op->affine_load(e.data());
      GridVelocity rhs(g);
      Eigen::Map<Eigen::VectorXd>(rhs.data().data(), rhs.data().size()) = -load / hd;

      SaddleResult res = system.solve(rhs, zero_div, nullptr, nullptr, opt);
      const int id = set.index(j, b);
      set.chi[id] = std::move(res.u);
      set.pressure[id] = std::move(res.p);
      set.momentum_residual[id] = res.stats.momentum_residual;
      set.rhs_norm[id] = load.norm() / hd;
      set.divergence_defect[id] = l2_norm(divergence(set.chi[id]));
      double l2 = l2_norm(set.chi[id]);
      set.chi_h1[id] = std::sqrt(l2 * l2 + op->grad_norm_sq(set.chi[id]));
      set.pi_l2[id] = l2_norm(set.pressure[id]);
    }
  return set;
}

}  // namespace

CorrectorSet solve_cell_problems(const CoefficientField& a, const PeriodicGrid& grid, double tol,
                                 SaddleOptions::Method method) {
  return solve_impl(a, grid, tol, method);
}

CorrectorSet solve_adjoint_cell_problems(const CoefficientField& a, const PeriodicGrid& grid,
                                         double tol, SaddleOptions::Method method) {
  FamilySpec spec = a.spec();
  CoefficientField adj(a.dim(), a.mu(), spec,
                       [a](const Vec& y) { return a.evaluate(y).adjoint(); }, a.holder());
  return solve_impl(adj, grid, tol, method);
}

GridVelocity corrector_field_at_scale(const CorrectorSet& set, int j, int b, double eps,
                                      const GridDesc& target, bool* interpolated) {
  if (eps <= 0.0) throw ValidationError("corrector_field_at_scale: eps must be positive");
  const int d = target.d;
  if (d != set.grid.d) throw ValidationError("corrector_field_at_scale: dimension mismatch");
  const GridVelocity& chi = set.chi[set.index(j, b)];
  GridVelocity out(target);
  const VelocityLayout& lay = out.layout();

  // Nesting: the scaled cell lattice lands exactly on target sample points
  // when eps spans an integer number of target cells equal to the cell grid.
  const double cells_per_period = eps / target.h();
  const bool nests = std::abs(cells_per_period - set.grid.n) < 1e-9 &&
                     std::abs(cells_per_period - std::round(cells_per_period)) < 1e-9;
  if (interpolated) *interpolated = !nests;

  const int p = set.grid.n;
  for (int c = 0; c < d; ++c)
    for_each_index(d, lay.shape[c], [&](const MIdx& idx) {
      if (nests) {
        MIdx src{0, 0, 0};
        for (int k = 0; k < d; ++k) src[k] = wrap(idx[k], p);
        out.at(c, idx) = eps * chi.at(c, src);
      } else {
        Vec x = lay.position(c, idx);
        Vec y{x[0] / eps, x[1] / eps, x[2] / eps};
        out.at(c, idx) = eps * interpolate_component(chi, c, y);
      }
    });
  return out;
}

}  // namespace stokes_homog
