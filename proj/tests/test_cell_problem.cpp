#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stokes_homog/cell_problem.hpp"

using namespace stokes_homog;

namespace {

CoefficientField trig_field(int d, double amplitude = 0.5) {
  FamilySpec s;
  s.kind = FamilySpec::Kind::kTrig;
  s.d = d;
  s.modes.push_back({amplitude, {1, 0, 0}, 0.0});
  return make_coefficient_field(s);
}

CoefficientField random_constant_field(int d, std::uint64_t seed, bool symmetric) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.2, 0.2);
  Tensor t = Tensor::identity(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) t(i, j, a, b) += unif(rng);
  if (symmetric) {
    Tensor adj = t.adjoint();
    t += adj;
    t *= 0.5;
  }
  FamilySpec s;
  s.kind = FamilySpec::Kind::kConstant;
  s.d = d;
  s.constant_part = t;
  return make_coefficient_field(s);
}

}  // namespace

TEST_CASE("constant coefficients have exactly zero correctors") {
  for (int d : {2, 3}) {
    CoefficientField a = random_constant_field(d, 21 + d, false);
    CorrectorSet set = solve_cell_problems(a, PeriodicGrid(d, 8));
    for (int id = 0; id < d * d; ++id) {
      CHECK(set.rhs_norm[id] <= 1e-12);
      CHECK(l2_norm(set.chi[id]) <= 1e-12);
      CHECK(l2_norm(set.pressure[id]) <= 1e-12);
    }
  }
}

TEST_CASE("identity coefficients have zero correctors") {
  FamilySpec s;
  s.kind = FamilySpec::Kind::kConstant;
  s.d = 2;
  CoefficientField a = make_coefficient_field(s);
  CorrectorSet set = solve_cell_problems(a, PeriodicGrid(2, 16));
  for (int id = 0; id < 4; ++id) {
    CHECK(l2_norm(set.chi[id]) <= 1e-12);
    CHECK(l2_norm(set.pressure[id]) <= 1e-12);
  }
}

TEST_CASE("trig family cell problems meet the solver contract at n=64") {
  CoefficientField a = trig_field(2);
  CorrectorSet set = solve_cell_problems(a, PeriodicGrid(2, 64), 1e-10);
  for (int id = 0; id < 4; ++id) {
    CHECK(set.momentum_residual[id] <= 1e-10);
    CHECK(set.divergence_defect[id] <= 1e-10);
    auto means = component_means(set.chi[id]);
    CHECK(std::abs(means[0]) <= 1e-12);
    CHECK(std::abs(means[1]) <= 1e-12);
    CHECK(std::abs(mean(set.pressure[id])) <= 1e-13);
  }
  // known analytic structure for a(y) depending on y0 only:
  // chi vanishes for the (0,0) problem, pressure absorbs the oscillation.
  CHECK(l2_norm(set.chi[set.index(0, 0)]) <= 1e-10);
  CHECK(set.pi_l2[set.index(0, 0)] == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("trig corrector at n=64 matches the n=512 reference within 2%") {
  CoefficientField a = trig_field(2);
  CorrectorSet coarse = solve_cell_problems(a, PeriodicGrid(2, 64), 1e-10);
  CorrectorSet fine = solve_cell_problems(a, PeriodicGrid(2, 512), 1e-10);

  // compare on the coarse sample positions; fine values interpolated
  const int id = coarse.index(0, 1);
  const GridVelocity& cc = coarse.chi[id];
  const GridVelocity& cf = fine.chi[id];
  double num = 0.0, den = 0.0;
  for (int c = 0; c < 2; ++c)
    for_each_index(2, cc.layout().shape[c], [&](const MIdx& idx) {
      Vec x = cc.layout().position(c, idx);
      double ref = interpolate_component(cf, c, x);
      num += (cc.at(c, idx) - ref) * (cc.at(c, idx) - ref);
      den += ref * ref;
    });
  CHECK(den > 0.0);
  CHECK(std::sqrt(num / den) <= 0.02);
}

TEST_CASE("weak form of the corrected linear fields vanishes on divergence-free tests") {
  CoefficientField a = trig_field(2, 0.4);
  PeriodicGrid grid(2, 32);
  GridDesc g(grid);
  CorrectorSet set = solve_cell_problems(a, grid, 1e-11);
  DiscreteOperator op(g, [&a](const Vec& x) { return a.evaluate(x); });

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n = g.n;
  MIdx shape{n, n, 1};
  for (int trial = 0; trial < 50; ++trial) {
    // discrete curl of a random node stream function: exactly divergence-free
    std::vector<double> stream(g.cell_count());
    for (double& v : stream) v = unif(rng);
    GridVelocity phi(g);
    for_each_index(2, shape, [&](const MIdx& i) {
      MIdx up{i[0], wrap(i[1] + 1, n), 0}, right{wrap(i[0] + 1, n), i[1], 0};
      double s = stream[flat_index(2, shape, i)];
      phi.at(0, i) = (stream[flat_index(2, shape, up)] - s) / g.h();
      phi.at(1, i) = -(stream[flat_index(2, shape, right)] - s) / g.h();
    });
    subtract_component_means(phi);
    CHECK(l2_norm(divergence(phi)) <= 1e-11);

    const int j = trial % 2, b = (trial / 2) % 2;
    std::array<double, 9> e{};
    e[j * 2 + b] = 1.0;
    double value = op.form(set.chi[set.index(j, b)], phi) +
                   Eigen::Map<const Eigen::VectorXd>(phi.data().data(), phi.data().size())
                       .dot(op.affine_load(e.data()));
    double h1 = std::sqrt(l2_norm(phi) * l2_norm(phi) + op.grad_norm_sq(phi));
    CHECK(std::abs(value) <= 1e-8 * h1);
  }
}

TEST_CASE("corrector norms stabilize under refinement") {
  CoefficientField a = trig_field(2);
  CorrectorSet coarse = solve_cell_problems(a, PeriodicGrid(2, 32));
  CorrectorSet fine = solve_cell_problems(a, PeriodicGrid(2, 64));
  for (int id = 0; id < 4; ++id) {
    double nc = coarse.chi_h1[id] + coarse.pi_l2[id];
    double nf = fine.chi_h1[id] + fine.pi_l2[id];
    CHECK(nc == doctest::Approx(nf).epsilon(0.05));
  }
}

TEST_CASE("corrector scaling: velocity invariant, pressure linear in the coefficient scale") {
  CoefficientField a = trig_field(2, 0.4);
  FamilySpec scaled_spec = a.spec();
  scaled_spec.trig_base *= 3.0;
  for (auto& m : scaled_spec.modes) m.amplitude *= 3.0;
  CoefficientField a3 = make_coefficient_field(scaled_spec);

  PeriodicGrid grid(2, 24);
  CorrectorSet s1 = solve_cell_problems(a, grid, 1e-11);
  CorrectorSet s3 = solve_cell_problems(a3, grid, 1e-11);
  for (int id = 0; id < 4; ++id) {
    CHECK(l2_dist(s1.chi[id], s3.chi[id]) <= 1e-9 * (1.0 + s1.chi_h1[id]));
    double perr = 0.0;
    for (std::size_t k = 0; k < s1.pressure[id].data().size(); ++k)
      perr = std::max(perr, std::abs(3.0 * s1.pressure[id].data()[k] -
                                     s3.pressure[id].data()[k]));
    CHECK(perr <= 1e-9 * (1.0 + 3.0 * s1.pi_l2[id]));
  }
}

TEST_CASE("adjoint cell problems: symmetric coefficients give the primal correctors") {
  CoefficientField a = trig_field(2);
  PeriodicGrid grid(2, 32);
  CorrectorSet primal = solve_cell_problems(a, grid, 1e-11);
  CorrectorSet adj = solve_adjoint_cell_problems(a, grid, 1e-11);
  for (int id = 0; id < 4; ++id)
    CHECK(l2_dist(primal.chi[id], adj.chi[id]) <= 1e-9);
}

TEST_CASE("adjoint cell problems of constant nonsymmetric coefficients are zero") {
  CoefficientField a = random_constant_field(2, 77, false);
  CorrectorSet adj = solve_adjoint_cell_problems(a, PeriodicGrid(2, 8));
  for (int id = 0; id < 4; ++id) CHECK(l2_norm(adj.chi[id]) <= 1e-12);
}

TEST_CASE("corrector field at scale: zero correctors tile to zero, eps=1 is the identity") {
  FamilySpec s;
  s.kind = FamilySpec::Kind::kConstant;
  s.d = 2;
  CoefficientField a = make_coefficient_field(s);
  CorrectorSet set = solve_cell_problems(a, PeriodicGrid(2, 8));
  bool interp = true;
  GridVelocity tiled = corrector_field_at_scale(set, 0, 0, 0.25, GridDesc(BoxGrid(2, 32)), &interp);
  CHECK_FALSE(interp);
  CHECK(l2_norm(tiled) == 0.0);

  CoefficientField at = trig_field(2);
  CorrectorSet ts = solve_cell_problems(at, PeriodicGrid(2, 16));
  GridVelocity same = corrector_field_at_scale(ts, 0, 1, 1.0, GridDesc(PeriodicGrid(2, 16)), &interp);
  CHECK_FALSE(interp);
  CHECK(l2_dist(same, ts.chi[ts.index(0, 1)]) == 0.0);
}

TEST_CASE("corrector tiling at eps=1/8 equals the direct evaluation oracle") {
  CoefficientField a = trig_field(2);
  CorrectorSet set = solve_cell_problems(a, PeriodicGrid(2, 32));
  const double eps = 1.0 / 8.0;
  GridDesc target(BoxGrid(2, 256));
  bool interp = true;
  GridVelocity tiled = corrector_field_at_scale(set, 1, 0, eps, target, &interp);
  CHECK_FALSE(interp);

  const GridVelocity& chi = set.chi[set.index(1, 0)];
  GridVelocity oracle(target);
  const VelocityLayout& lay = oracle.layout();
  for (int c = 0; c < 2; ++c)
    for_each_index(2, lay.shape[c], [&](const MIdx& idx) {
      Vec x = lay.position(c, idx);
      // direct pointwise evaluation: locate the cell-grid sample at frac(x/eps)
      Vec y = frac(Vec{x[0] / eps, x[1] / eps, 0.0});
      MIdx src{0, 0, 0};
      for (int k = 0; k < 2; ++k) {
        double t = y[k] * set.grid.n - (k == c ? 0.0 : 0.5);
        src[k] = wrap(int(std::lround(t)), set.grid.n);
      }
      oracle.at(c, idx) = eps * chi.at(c, src);
    });
  CHECK(l2_dist(tiled, oracle) == 0.0);
}

TEST_CASE("3d trig cell problems satisfy the contract at n=16") {
  CoefficientField a = trig_field(3);
  CorrectorSet set = solve_cell_problems(a, PeriodicGrid(3, 16), 1e-10);
  for (int id = 0; id < 9; ++id) {
    CHECK(set.momentum_residual[id] <= 1e-10);
    CHECK(set.divergence_defect[id] <= 1e-10);
  }
}
