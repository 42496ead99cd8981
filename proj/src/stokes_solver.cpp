#include "stokes_homog/stokes_solver.hpp"

namespace stokes_homog {

BoundaryData BoundaryData::from_function(const GridDesc& g,
                                         const std::function<double(int, const Vec&)>& h) {
  BoundaryData b = zero(g);
  const VelocityLayout& lay = b.values.layout();
  for (int c = 0; c < g.d; ++c)
    for_each_index(g.d, lay.shape[c], [&](const MIdx& idx) {
      if (lay.on_boundary(c, idx)) b.values.at(c, idx) = h(c, lay.position(c, idx));
    });
  TraceLayout traces(g);
  traces.for_each([&](int a, int s, int c, const MIdx& idx) {
    b.traces[traces.index(a, s, c, idx)] = h(c, traces.position(a, s, c, idx));
  });
  return b;
}

double BoundaryData::l2_scale(const GridDesc& g) const {
  double area_w = 1.0;
  for (int k = 0; k < g.d - 1; ++k) area_w *= g.h();
  double s = 0.0;
  const VelocityLayout& lay = values.layout();
  for (int c = 0; c < g.d; ++c)
    for_each_index(g.d, lay.shape[c], [&](const MIdx& idx) {
      if (lay.on_boundary(c, idx)) s += values.at(c, idx) * values.at(c, idx);
    });
  for (Eigen::Index k = 0; k < traces.size(); ++k) s += traces[k] * traces[k];
  return std::sqrt(s * area_w);
}

std::function<Tensor(const Vec&)> StokesProblem::coefficient() const {
  if (oscillating) {
    ScaledField f = *oscillating;
    return [f](const Vec& x) { return f.evaluate(x); };
  }
  if (constant_coeff) {
    Tensor t = *constant_coeff;
    return [t](const Vec&) { return t; };
  }
  throw ValidationError("StokesProblem: no coefficients set");
}

double check_compatibility(const StokesProblem& problem) {
  GridDesc g(problem.domain);
  double hd = 1.0;
  for (int k = 0; k < g.d; ++k) hd *= g.h();
  double vol_int = 0.0;
  for (double v : problem.div_data.data()) vol_int += v;
  vol_int *= hd;

  double area_w = hd / g.h();
  double flux = 0.0;
  const VelocityLayout& lay = problem.boundary.values.layout();
  for (int c = 0; c < g.d; ++c)
    for_each_index(g.d, lay.shape[c], [&](const MIdx& idx) {
      if (idx[c] == 0)
        flux -= problem.boundary.values.at(c, idx) * area_w;
      else if (idx[c] == g.n)
        flux += problem.boundary.values.at(c, idx) * area_w;
    });
  return vol_int - flux;
}

namespace {

StokesSolution solve_impl(const StokesProblem& problem,
                          const std::function<Tensor(const Vec&)>& coeff, double eps,
                          double tol, SaddleOptions::Method method,
                          const GridPressure* pressure_guess = nullptr) {
  GridDesc g(problem.domain);
  if (eps > 0.0) {
    double cells = eps / g.h();
    if (std::abs(cells - std::round(cells)) > 1e-12 || cells < 1.0)
      throw ValidationError("solve_dirichlet: eps must be an integer number of grid cells");
  }

  const double defect = check_compatibility(problem);
  double data_scale = std::abs(l2_norm(problem.div_data)) +
                      problem.boundary.l2_scale(g) + 1.0;
  if (std::abs(defect) > std::max(tol * 100, 1e-9) * data_scale)
    throw ValidationError("solve_dirichlet: incompatible divergence and boundary data");

  auto op = std::make_shared<DiscreteOperator>(g, coeff);
  StokesLinearSystem system(op);

  GridVelocity momentum = problem.body_force;
  if (problem.flux_source) {
    const GradientSampling& s = op->sampling();
    Eigen::VectorXd f = s.tensor_field_samples(problem.flux_source);
    for (std::size_t k = 0; k < s.sample_count(); ++k) f[k] *= s.weights()[k];
    double hd = 1.0;
    for (int k = 0; k < g.d; ++k) hd *= g.h();
    Eigen::VectorXd load = SpMat(s.G().transpose()) * f / hd;
    for (std::size_t k = 0; k < momentum.data().size(); ++k) momentum.data()[k] -= load[k];
  }

  SaddleOptions opt;
  opt.rel_tol = tol;
  opt.method = method;
  opt.pressure_guess = pressure_guess;
  SaddleResult res =
      system.solve(momentum, problem.div_data, &problem.boundary.values,
                   &problem.boundary.traces, opt);

  StokesSolution sol;
  sol.u = std::move(res.u);
  sol.p = std::move(res.p);
  sol.stats = res.stats;

  double ul2 = l2_norm(sol.u);
  double uh1 = std::sqrt(ul2 * ul2 + op->grad_norm_sq(sol.u));
  double denom = l2_norm(problem.body_force) + l2_norm(problem.div_data) +
                 problem.boundary.l2_scale(g);
  sol.energy_ratio = denom > 0.0 ? (uh1 + l2_norm(sol.p)) / denom : 0.0;
  return sol;
}

}  // namespace

StokesSolution solve_dirichlet(const StokesProblem& problem, double tol,
                               SaddleOptions::Method method,
                               const GridPressure* pressure_guess) {
  double eps = problem.oscillating ? problem.oscillating->eps() : 0.0;
  return solve_impl(problem, problem.coefficient(), eps, tol, method, pressure_guess);
}

StokesSolution solve_homogenized(const EffectiveTensor& hat, const StokesProblem& problem,
                                 double tol, SaddleOptions::Method method) {
  Tensor t = hat.entries;
  return solve_impl(problem, [t](const Vec&) { return t; }, 0.0, tol, method);
}

RescaledSystem rescale_solution(const StokesProblem& problem, const StokesSolution& solution,
                                int r) {
  if (r < 1 || (r & (r - 1)) != 0)
    throw ValidationError("rescale_solution: r must be a power of two");
  RescaledSystem out;
  out.domain = BoxGrid(problem.domain.d, problem.domain.n, problem.domain.length / r);
  double eps = problem.oscillating ? problem.oscillating->eps() : 0.0;
  out.eps = eps / r;

  // Same lattice read at rx: v(x) = u(rx) is a relabeling of the DOF array
  // onto the shrunken box; p, g, F are scaled.
  GridDesc ng(out.domain);
  out.velocity = GridVelocity(ng);
  out.velocity.data() = solution.u.data();
  out.pressure = GridPressure(ng);
  out.pressure.data() = solution.p.data();
  for (double& v : out.pressure.data()) v *= r;
  out.div_data = GridPressure(ng);
  out.div_data.data() = problem.div_data.data();
  for (double& v : out.div_data.data()) v *= r;
  out.momentum_data = GridVelocity(ng);
  out.momentum_data.data() = problem.body_force.data();
  for (double& v : out.momentum_data.data()) v *= double(r) * r;
  return out;
}

std::pair<double, double> rescaled_residual(const RescaledSystem& sys,
                                            const CoefficientField& base) {
  GridDesc g(sys.domain);
  if (sys.eps <= 0.0) throw ValidationError("rescaled_residual: oscillating systems only");
  ScaledField scaled(base, sys.eps);
  DiscreteOperator op(g, [&scaled](const Vec& x) { return scaled.evaluate(x); });

  GridVelocity lu = op.apply(sys.velocity);
  GridVelocity gp = gradient(sys.pressure);
  GridPressure div = divergence(sys.velocity);

  const int n = g.n;
  double mom = 0.0;
  const VelocityLayout& lay = lu.layout();
  for (int c = 0; c < g.d; ++c)
    for_each_index(g.d, lay.shape[c], [&](const MIdx& idx) {
      for (int k = 0; k < g.d; ++k) {
        if (k == c) {
          if (idx[k] < 2 || idx[k] > n - 2) return;
        } else {
          if (idx[k] < 1 || idx[k] > n - 2) return;
        }
      }
      double rres = lu.at(c, idx) + gp.at(c, idx) - sys.momentum_data.at(c, idx);
      mom = std::max(mom, std::abs(rres));
    });

  double dmax = 0.0;
  for (std::size_t k = 0; k < div.data().size(); ++k)
    dmax = std::max(dmax, std::abs(div.data()[k] - sys.div_data.data()[k]));
  return {mom, dmax};
}

}  // namespace stokes_homog
