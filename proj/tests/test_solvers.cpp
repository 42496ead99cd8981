#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stokes_homog/solvers.hpp"

using namespace stokes_homog;

namespace {

CoefficientField identity_field(int d) {
  FamilySpec s;
  s.kind = FamilySpec::Kind::kConstant;
  s.d = d;
  return make_coefficient_field(s);
}

CoefficientField trig_field(int d, double amplitude = 0.5) {
  FamilySpec s;
  s.kind = FamilySpec::Kind::kTrig;
  s.d = d;
  s.modes.push_back({amplitude, {1, 0, 0}, 0.0});
  return make_coefficient_field(s);
}

Eigen::VectorXd random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = unif(rng);
  return v;
}

}  // namespace

TEST_CASE("fast componentwise Laplace solver inverts the constant-coefficient operator") {
  for (bool periodic : {true, false}) {
    for (int d : {2, 3}) {
      GridDesc g = periodic ? GridDesc(PeriodicGrid(d, d == 2 ? 16 : 8))
                            : GridDesc(BoxGrid(d, d == 2 ? 16 : 8));
      CoefficientField a = identity_field(d);
      auto op = std::make_shared<DiscreteOperator>(g, [&a](const Vec& x) { return a.evaluate(x); });
      InteriorMap map(g);
      // interior stiffness, pointwise scale
      SpMat K = op->stiffness();
      std::vector<Eigen::Triplet<double>> t;
      for (int k = 0; k < K.outerSize(); ++k)
        for (SpMat::InnerIterator it(K, k); it; ++it) {
          std::int64_t r = map.full_to_interior[it.row()];
          std::int64_t c = map.full_to_interior[it.col()];
          if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
        }
      SpMat kii(map.size(), map.size());
      kii.setFromTriplets(t.begin(), t.end());
      double hd = 1.0;
      for (int k = 0; k < d; ++k) hd *= g.h();

      ComponentLaplaceSolver fast(g);
      Eigen::VectorXd r = random_vec(map.size(), 99 + d + (periodic ? 1 : 0));
      if (periodic) {
        // remove the componentwise means the periodic operator cannot see
        const VelocityLayout& lay = map.layout;
        for (int c = 0; c < d; ++c) {
          double m = 0.0;
          for (std::size_t k = lay.offset[c]; k < lay.offset[c + 1]; ++k) m += r[k];
          m /= double(lay.offset[c + 1] - lay.offset[c]);
          for (std::size_t k = lay.offset[c]; k < lay.offset[c + 1]; ++k) r[k] -= m;
        }
      }
      Eigen::VectorXd x(map.size());
      std::size_t off = 0;
      for (int c = 0; c < d; ++c) {
        fast.solve(c, r.data() + off, x.data() + off);
        off += fast.block_size(c);
      }
      Eigen::VectorXd back = kii * x / hd;
      CHECK((back - r).norm() <= 1e-10 * r.norm());
    }
  }
}

TEST_CASE("saddle solver reproduces a manufactured discrete solution on the torus") {
  GridDesc g(PeriodicGrid(2, 16));
  CoefficientField a = trig_field(2);
  auto op = std::make_shared<DiscreteOperator>(g, [&a](const Vec& x) { return a.evaluate(x); });
  StokesLinearSystem system(op);
  double hd = g.h() * g.h();

  // manufactured discrete pair: divergence-free mean-zero u*, mean-zero p*
  GridVelocity ustar(g);
  GridPressure psi(g);  // node stream function misused as storage; values at cells
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> stream(g.cell_count());
  for (double& v : stream) v = unif(rng);
  const int n = g.n;
  MIdx shape{n, n, 1};
  for_each_index(2, shape, [&](const MIdx& i) {
    MIdx up{i[0], wrap(i[1] + 1, n), 0}, right{wrap(i[0] + 1, n), i[1], 0};
    double s = stream[flat_index(2, shape, i)];
    ustar.at(0, i) = (stream[flat_index(2, shape, up)] - s) / g.h();
    ustar.at(1, i) = -(stream[flat_index(2, shape, right)] - s) / g.h();
  });
  subtract_component_means(ustar);
  GridPressure pstar(g);
  for (double& v : pstar.data()) v = unif(rng);
  subtract_mean(pstar);

  // rhs = Kpw u* - D^T p*, rg = D u* (= 0 by construction)
  Eigen::Map<const Eigen::VectorXd> uv(ustar.data().data(), ustar.data().size());
  Eigen::Map<const Eigen::VectorXd> pv(pstar.data().data(), pstar.data().size());
  SpMat D = divergence_matrix(g);
  Eigen::VectorXd rhs = op->stiffness() * uv / hd - SpMat(D.transpose()) * pv;
  GridVelocity momentum(g);
  Eigen::Map<Eigen::VectorXd>(momentum.data().data(), momentum.data().size()) = rhs;
  GridPressure div_rhs(g);
  Eigen::Map<Eigen::VectorXd>(div_rhs.data().data(), div_rhs.data().size()) = D * uv;

  SaddleOptions opt;
  opt.rel_tol = 1e-11;
  for (auto method : {SaddleOptions::Method::kSchur, SaddleOptions::Method::kDirect}) {
    opt.method = method;
    SaddleResult res = system.solve(momentum, div_rhs, nullptr, nullptr, opt);
    CHECK(res.stats.converged);
    CHECK(l2_dist(res.u, ustar) < 1e-9);
    double perr = 0.0;
    for (std::size_t k = 0; k < pstar.data().size(); ++k)
      perr = std::max(perr, std::abs(res.p.data()[k] - pstar.data()[k]));
    CHECK(perr < 1e-8);
  }
}

TEST_CASE("saddle solver handles box Dirichlet data through elimination") {
  GridDesc g(BoxGrid(2, 12));
  CoefficientField a = trig_field(2, 0.3);
  auto op = std::make_shared<DiscreteOperator>(g, [&a](const Vec& x) { return a.evaluate(x); });
  StokesLinearSystem system(op);
  double hd = g.h() * g.h();

  // arbitrary full-layout u* (boundary values included) and traces t*
  GridVelocity ustar(g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (double& v : ustar.data()) v = unif(rng);
  const TraceLayout& traces = op->sampling().traces();
  Eigen::VectorXd tstar = random_vec(traces.total, 13);
  GridPressure pstar(g);
  for (double& v : pstar.data()) v = unif(rng);
  subtract_mean(pstar);

  Eigen::Map<const Eigen::VectorXd> uv(ustar.data().data(), ustar.data().size());
  Eigen::Map<const Eigen::VectorXd> pv(pstar.data().data(), pstar.data().size());
  SpMat D = divergence_matrix(g);
  const GradientSampling& s = op->sampling();
  Eigen::VectorXd rhs = (op->stiffness() * uv +
                         SpMat(s.G().transpose()) * SpMat(op->W() * s.Gb()) * tstar) /
                            hd -
                        SpMat(D.transpose()) * pv;
  GridVelocity momentum(g);
  Eigen::Map<Eigen::VectorXd>(momentum.data().data(), momentum.data().size()) = rhs;
  GridPressure div_rhs(g);
  Eigen::Map<Eigen::VectorXd>(div_rhs.data().data(), div_rhs.data().size()) = D * uv;

  SaddleOptions opt;
  opt.rel_tol = 1e-11;
  for (auto method : {SaddleOptions::Method::kSchur, SaddleOptions::Method::kDirect}) {
    opt.method = method;
    SaddleResult res = system.solve(momentum, div_rhs, &ustar, &tstar, opt);
    CHECK(res.stats.converged);
    CHECK(l2_dist(res.u, ustar) < 1e-9);
  }
}

TEST_CASE("zero data produces exactly zero") {
  GridDesc g(PeriodicGrid(2, 8));
  CoefficientField a = trig_field(2);
  auto op = std::make_shared<DiscreteOperator>(g, [&a](const Vec& x) { return a.evaluate(x); });
  StokesLinearSystem system(op);
  GridVelocity zero_u(g);
  GridPressure zero_p(g);
  SaddleOptions opt;
  SaddleResult res = system.solve(zero_u, zero_p, nullptr, nullptr, opt);
  CHECK(l2_norm(res.u) == 0.0);
  CHECK(l2_norm(res.p) == 0.0);
}
