#include "stokes_homog/solvers.hpp"

#include <Eigen/SparseLU>
#include <fftw3.h>

#include <mutex>
#include <numbers>

namespace stokes_homog {

namespace {
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct ComponentLaplaceSolver::Impl {
  GridDesc g;
  // periodic: one r2c/c2r plan pair shared by all components
  fftw_plan fwd = nullptr, bwd = nullptr;
  std::vector<double> rbuf;
  fftw_complex* cbuf = nullptr;
  // box: per-component r2r plan pairs
  std::array<fftw_plan, 3> bfwd{nullptr, nullptr, nullptr};
  std::array<fftw_plan, 3> bbwd{nullptr, nullptr, nullptr};
  std::vector<double> xbuf, ybuf;

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    for (int c = 0; c < 3; ++c) {
      if (bfwd[c]) fftw_destroy_plan(bfwd[c]);
      if (bbwd[c]) fftw_destroy_plan(bbwd[c]);
    }
    if (cbuf) fftw_free(cbuf);
  }
};

ComponentLaplaceSolver::ComponentLaplaceSolver(const GridDesc& g) : impl_(new Impl) {
  impl_->g = g;
  const int d = g.d, n = g.n;
  std::lock_guard<std::mutex> lock(fftw_mutex());
  if (g.periodic) {
    std::size_t rsize = g.cell_count();
    std::size_t csize = rsize / n * (n / 2 + 1);
    impl_->rbuf.assign(rsize, 0.0);
    impl_->cbuf = fftw_alloc_complex(csize);
    int dims[3] = {n, n, n};
    impl_->fwd = fftw_plan_dft_r2c(d, dims, impl_->rbuf.data(), impl_->cbuf, FFTW_ESTIMATE);
    impl_->bwd = fftw_plan_dft_c2r(d, dims, impl_->cbuf, impl_->rbuf.data(), FFTW_ESTIMATE);
  } else {
    std::size_t maxsz = 1;
    for (int k = 0; k < d; ++k) maxsz *= n;
    impl_->xbuf.assign(maxsz, 0.0);
    impl_->ybuf.assign(maxsz, 0.0);
    for (int c = 0; c < d; ++c) {
      int dims[3];
      fftw_r2r_kind fk[3], bk[3];
      for (int k = 0; k < d; ++k) {
        dims[k] = (k == c) ? n - 1 : n;
        fk[k] = (k == c) ? FFTW_RODFT00 : FFTW_RODFT10;
        bk[k] = (k == c) ? FFTW_RODFT00 : FFTW_RODFT01;
      }
      impl_->bfwd[c] =
          fftw_plan_r2r(d, dims, impl_->xbuf.data(), impl_->ybuf.data(), fk, FFTW_ESTIMATE);
      impl_->bbwd[c] =
          fftw_plan_r2r(d, dims, impl_->ybuf.data(), impl_->xbuf.data(), bk, FFTW_ESTIMATE);
    }
  }
}

ComponentLaplaceSolver::~ComponentLaplaceSolver() = default;

MIdx ComponentLaplaceSolver::block_shape(int comp) const {
  const GridDesc& g = impl_->g;
  MIdx s{1, 1, 1};
  for (int k = 0; k < g.d; ++k) s[k] = (!g.periodic && k == comp) ? g.n - 1 : g.n;
  return s;
}

std::size_t ComponentLaplaceSolver::block_size(int comp) const {
  MIdx s = block_shape(comp);
  std::size_t sz = 1;
  for (int k = 0; k < impl_->g.d; ++k) sz *= s[k];
  return sz;
}

void ComponentLaplaceSolver::solve(int comp, const double* rhs, double* out) const {
  const GridDesc& g = impl_->g;
  const int d = g.d, n = g.n;
  const double h = g.h();
  if (g.periodic) {
    std::copy(rhs, rhs + g.cell_count(), impl_->rbuf.begin());
    fftw_execute(impl_->fwd);
    const int nz = n / 2 + 1;
    const std::size_t rows = g.cell_count() / n;
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t rem = r;
      double lam = 0.0;
      for (int k = d - 2; k >= 0; --k) {
        int idx = static_cast<int>(rem % n);
        rem /= n;
        lam += (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * idx / n)) / (h * h);
      }
      for (int kz = 0; kz < nz; ++kz) {
        double l = lam + (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * kz / n)) / (h * h);
        std::size_t id = r * nz + kz;
        if (l == 0.0) {
          impl_->cbuf[id][0] = 0.0;
          impl_->cbuf[id][1] = 0.0;
        } else {
          impl_->cbuf[id][0] /= l;
          impl_->cbuf[id][1] /= l;
        }
      }
    }
    fftw_execute(impl_->bwd);
    const double scale = 1.0 / double(g.cell_count());
    for (std::size_t k = 0; k < g.cell_count(); ++k) out[k] = impl_->rbuf[k] * scale;
  } else {
    const MIdx shape = block_shape(comp);
    const std::size_t sz = block_size(comp);
    std::copy(rhs, rhs + sz, impl_->xbuf.begin());
    fftw_execute_r2r(impl_->bfwd[comp], impl_->xbuf.data(), impl_->ybuf.data());
    double norm = 1.0;
    for (int k = 0; k < d; ++k) norm *= 2.0 * n;
    std::size_t flat = 0;
    for_each_index(d, shape, [&](const MIdx& i) {
      double lam = 0.0;
      for (int k = 0; k < d; ++k) {
        int m = i[k] + 1;  // DST mode number
        lam += (2.0 - 2.0 * std::cos(std::numbers::pi * m / n)) / (h * h);
      }
      impl_->ybuf[flat] /= lam;
      ++flat;
    });
    fftw_execute_r2r(impl_->bbwd[comp], impl_->ybuf.data(), impl_->xbuf.data());
    for (std::size_t k = 0; k < sz; ++k) out[k] = impl_->xbuf[k] / norm;
  }
}

InteriorMap::InteriorMap(const GridDesc& g) : layout(g) {
  full_to_interior.assign(layout.size(), -1);
  if (g.periodic) {
    interior_to_full.resize(layout.size());
    for (std::size_t k = 0; k < layout.size(); ++k) {
      full_to_interior[k] = static_cast<std::int64_t>(k);
      interior_to_full[k] = static_cast<std::int64_t>(k);
    }
    return;
  }
  for (int c = 0; c < g.d; ++c)
    for_each_index(g.d, layout.shape[c], [&](const MIdx& idx) {
      if (layout.on_boundary(c, idx)) return;
      std::size_t f = layout.index(c, idx);
      full_to_interior[f] = static_cast<std::int64_t>(interior_to_full.size());
      interior_to_full.push_back(static_cast<std::int64_t>(f));
    });
}

namespace {

void split_columns(const SpMat& m, const std::vector<std::int64_t>& map, std::size_t ni,
                   SpMat& mi, SpMat& mb) {
  std::vector<Eigen::Triplet<double>> ti, tb;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      std::int64_t c = map[it.col()];
      if (c >= 0)
        ti.emplace_back(it.row(), c, it.value());
      else
        tb.emplace_back(it.row(), it.col(), it.value());
    }
  mi.resize(m.rows(), ni);
  mi.setFromTriplets(ti.begin(), ti.end());
  mb.resize(m.rows(), m.cols());
  mb.setFromTriplets(tb.begin(), tb.end());
}

SpMat select_rows(const SpMat& m, const std::vector<std::int64_t>& map, std::size_t ni) {
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      std::int64_t r = map[it.row()];
      if (r >= 0) t.emplace_back(r, it.col(), it.value());
    }
  SpMat out(ni, m.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

double sym_defect(const SpMat& m) {
  SpMat diff = SpMat(m.transpose()) - m;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it) num = std::max(num, std::abs(it.value()));
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) den = std::max(den, std::abs(it.value()));
  return den > 0 ? num / den : 0.0;
}

}  // namespace

struct StokesLinearSystem::DirectCache {
  Eigen::SparseLU<SpMat> lu;
  bool ready = false;
};

StokesLinearSystem::StokesLinearSystem(std::shared_ptr<const DiscreteOperator> op)
    : op_(std::move(op)), map_(op_->grid()) {
  const GridDesc& g = op_->grid();
  hd_ = 1.0;
  for (int k = 0; k < g.d; ++k) hd_ *= g.h();

  SpMat Ki = select_rows(op_->stiffness(), map_.full_to_interior, map_.size());
  split_columns(Ki, map_.full_to_interior, map_.size(), Kii_, Kib_);

  SpMat D = divergence_matrix(g);
  split_columns(D, map_.full_to_interior, map_.size(), Di_, Db_);

  const GradientSampling& s = op_->sampling();
  if (s.traces().total > 0) {
    SpMat full_t = SpMat(s.G().transpose()) * SpMat(op_->W() * s.Gb());
    T_ = select_rows(full_t, map_.full_to_interior, map_.size());
  } else {
    T_.resize(map_.size(), 0);
  }

  symmetric_ = sym_defect(Kii_) < 1e-12;
  if (symmetric_) fast_ = std::make_unique<ComponentLaplaceSolver>(g);
}

void StokesLinearSystem::project_velocity_means(Eigen::VectorXd& v) const {
  if (!grid().periodic) return;
  const VelocityLayout& lay = map_.layout;
  for (int c = 0; c < grid().d; ++c) {
    std::size_t lo = lay.offset[c], hi = lay.offset[c + 1];
    double m = 0.0;
    for (std::size_t k = lo; k < hi; ++k) m += v[k];
    m /= double(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) v[k] -= m;
  }
}

int StokesLinearSystem::pcg_velocity(const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                                     double tol) const {
  const std::size_t n = map_.size();
  const GridDesc& g = grid();
  if (x.size() != Eigen::Index(n)) x = Eigen::VectorXd::Zero(n);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    x.setZero();
    return 0;
  }
  Eigen::VectorXd r = rhs;
  if (x.norm() != 0.0) r -= Kii_ * x / hd_;
  project_velocity_means(r);

  auto precond = [&](const Eigen::VectorXd& in) {
    Eigen::VectorXd out(n);
    std::size_t off = 0;
    for (int c = 0; c < g.d; ++c) {
      fast_->solve(c, in.data() + off, out.data() + off);
      off += fast_->block_size(c);
    }
    project_velocity_means(out);
    return out;
  };

  Eigen::VectorXd z = precond(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  int it = 0;
  const int max_it = 10000;
  while (it < max_it && r.norm() > tol * rhs_norm) {
    Eigen::VectorXd ap = Kii_ * p / hd_;
    project_velocity_means(ap);
    const double alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    z = precond(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    ++it;
  }
  project_velocity_means(x);
  return it;
}

SaddleResult StokesLinearSystem::solve(const GridVelocity& momentum_rhs,
                                       const GridPressure& div_rhs,
                                       const GridVelocity* boundary_values,
                                       const Eigen::VectorXd* traces,
                                       const SaddleOptions& opt) const {
  const GridDesc& g = grid();
  Eigen::VectorXd ru(map_.size());
  for (std::size_t k = 0; k < map_.size(); ++k)
    ru[k] = momentum_rhs.data()[map_.interior_to_full[k]];
  Eigen::VectorXd rg =
      Eigen::Map<const Eigen::VectorXd>(div_rhs.data().data(), div_rhs.data().size());

  Eigen::VectorXd ub;
  if (!g.periodic) {
    ub = Eigen::VectorXd::Zero(map_.layout.size());
    if (boundary_values) {
      for (std::size_t k = 0; k < map_.layout.size(); ++k)
        if (map_.full_to_interior[k] < 0) ub[k] = boundary_values->data()[k];
    }
    ru -= (Kib_ * ub) / hd_;
    rg -= Db_ * ub;
    if (traces && traces->size() > 0) ru -= (T_ * *traces) / hd_;
  }

  SaddleResult res;
  const bool want_schur = opt.method == SaddleOptions::Method::kSchur ||
                          (opt.method == SaddleOptions::Method::kAuto && symmetric_);
  if (want_schur && symmetric_) {
    res = solve_schur(ru, rg, opt);
    if (!res.stats.converged && opt.method == SaddleOptions::Method::kAuto)
      res = solve_direct(ru, rg, opt);
  } else {
    res = solve_direct(ru, rg, opt);
  }

  if (!g.periodic && boundary_values) {
    for (std::size_t k = 0; k < map_.layout.size(); ++k)
      if (map_.full_to_interior[k] < 0) res.u.data()[k] = boundary_values->data()[k];
  }
  if (!res.stats.converged)
    throw SolverError("saddle solver did not converge: momentum residual " +
                      std::to_string(res.stats.momentum_residual) + ", divergence residual " +
                      std::to_string(res.stats.divergence_residual));
  return res;
}

void StokesLinearSystem::finalize(SaddleResult& res, const Eigen::VectorXd& ru,
                                  const Eigen::VectorXd& rg, const Eigen::VectorXd& ui,
                                  const Eigen::VectorXd& p) const {
  const GridDesc& g = grid();
  res.u = GridVelocity(g);
  for (std::size_t k = 0; k < map_.size(); ++k) res.u.data()[map_.interior_to_full[k]] = ui[k];
  res.p = GridPressure(g);
  Eigen::Map<Eigen::VectorXd>(res.p.data().data(), res.p.data().size()) = p;
  subtract_mean(res.p);
  if (g.periodic) subtract_component_means(res.u);

  Eigen::VectorXd pm = Eigen::Map<const Eigen::VectorXd>(res.p.data().data(), res.p.data().size());
  Eigen::VectorXd ui2(map_.size());
  for (std::size_t k = 0; k < map_.size(); ++k) ui2[k] = res.u.data()[map_.interior_to_full[k]];
  // momentum rows: K u / h^d - D^T p = ru
  Eigen::VectorXd mom = Kii_ * ui2 / hd_ - SpMat(Di_.transpose()) * pm - ru;
  Eigen::VectorXd div = Di_ * ui2 - rg;
  // data scale: momentum ~ ru, divergence ~ h * momentum
  const double h = grid().h();
  const double scale = std::max({ru.norm(), rg.norm() / h, 1e-300});
  res.stats.momentum_residual = mom.norm() / scale;
  res.stats.divergence_residual = div.norm() / (h * scale);
}

SaddleResult StokesLinearSystem::solve_schur(const Eigen::VectorXd& ru,
                                             const Eigen::VectorXd& rg,
                                             const SaddleOptions& opt) const {
  SaddleResult res;
  res.stats.method = "schur-cg";
  // Each pass runs the Schur-complement CG at moderate tolerance; outer
  // defect correction on the true coupled residual then pushes the solution
  // to the requested accuracy without fighting the inexact-inner plateau.
  const double pass_tol = 1e-7;
  const double inner_tol = 1e-9;
  int inner_total = 0;
  int outer_total = 0;

  const SpMat DT = SpMat(Di_.transpose());
  auto s_apply = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(map_.size());
    inner_total += pcg_velocity(DT * p, v, inner_tol);
    Eigen::VectorXd out = Di_ * v;
    out.array() -= out.mean();
    return out;
  };

  auto schur_pass = [&](const Eigen::VectorXd& fu, const Eigen::VectorXd& fg,
                        Eigen::VectorXd& du, Eigen::VectorXd& dp) {
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(map_.size());
    inner_total += pcg_velocity(fu, u0, inner_tol);
    Eigen::VectorXd b = fg - Di_ * u0;
    b.array() -= b.mean();
    dp = Eigen::VectorXd::Zero(fg.size());
    const double bnorm = b.norm();
    if (bnorm > 0.0) {
      Eigen::VectorXd r = b;
      Eigen::VectorXd dir = r;
      double rr = r.squaredNorm();
      double best = rr;
      int stale = 0;
      int it = 0;
      while (it < opt.max_outer && std::sqrt(rr) > pass_tol * bnorm) {
        Eigen::VectorXd sd = s_apply(dir);
        const double denom = dir.dot(sd);
        if (denom <= 0.0) break;
        const double alpha = rr / denom;
        dp += alpha * dir;
        r -= alpha * sd;
        dp.array() -= dp.mean();
        const double rr_new = r.squaredNorm();
        dir = r + (rr_new / rr) * dir;
        rr = rr_new;
        if (rr < 0.9 * best) {
          best = rr;
          stale = 0;
        } else if (++stale > 30) {
          break;  // inexact-inner plateau
        }
        ++it;
      }
      outer_total += it;
    }
    du = Eigen::VectorXd::Zero(map_.size());
    inner_total += pcg_velocity(fu + DT * dp, du, inner_tol);
  };

  const double h = grid().h();
  const double scale = std::max({ru.norm(), rg.norm() / h, 1e-300});
  Eigen::VectorXd u = Eigen::VectorXd::Zero(map_.size());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(rg.size());
  if (opt.pressure_guess && opt.pressure_guess->data().size() == std::size_t(rg.size())) {
    p = Eigen::Map<const Eigen::VectorXd>(opt.pressure_guess->data().data(), rg.size());
    p.array() -= p.mean();
  }

  for (int round = 0; round < 4; ++round) {
    Eigen::VectorXd fu = ru - (Kii_ * u / hd_ - DT * p);
    Eigen::VectorXd fg = rg - Di_ * u;
    if (grid().periodic) project_velocity_means(fu);
    if (fu.norm() <= 0.5 * opt.rel_tol * scale &&
        fg.norm() <= 0.5 * opt.rel_tol * h * scale)
      break;
    Eigen::VectorXd du, dp;
    schur_pass(fu, fg, du, dp);
    u += du;
    p += dp;
    p.array() -= p.mean();
  }

  res.stats.outer_iterations = outer_total;
  res.stats.inner_iterations = inner_total;
  finalize(res, ru, rg, u, p);
  const double tol_ok = std::max(opt.rel_tol, 1e-15);
  res.stats.converged =
      res.stats.momentum_residual <= tol_ok && res.stats.divergence_residual <= tol_ok;
  return res;
}

SaddleResult StokesLinearSystem::solve_direct(const Eigen::VectorXd& ru,
                                              const Eigen::VectorXd& rg,
                                              const SaddleOptions& opt) const {
  const GridDesc& g = grid();
  const std::size_t nu = map_.size();
  const std::size_t np = g.cell_count();
  const int d = g.d;
  const std::size_t extra = g.periodic ? std::size_t(1 + d) : 1;
  const std::size_t n = nu + np + extra;

  if (!direct_) direct_ = std::make_shared<DirectCache>();
  if (!direct_->ready) {
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < Kii_.outerSize(); ++k)
      for (SpMat::InnerIterator it(Kii_, k); it; ++it)
        t.emplace_back(it.row(), it.col(), it.value() / hd_);
    for (int k = 0; k < Di_.outerSize(); ++k)
      for (SpMat::InnerIterator it(Di_, k); it; ++it) {
        t.emplace_back(nu + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), nu + it.row(), -it.value());
      }
    for (std::size_t c = 0; c < np; ++c) {
      t.emplace_back(nu + c, nu + np, 1.0);
      t.emplace_back(nu + np, nu + c, 1.0);
    }
    if (g.periodic) {
      const VelocityLayout& lay = map_.layout;
      for (int c = 0; c < d; ++c)
        for (std::size_t k = lay.offset[c]; k < lay.offset[c + 1]; ++k) {
          t.emplace_back(k, nu + np + 1 + c, 1.0);
          t.emplace_back(nu + np + 1 + c, k, 1.0);
        }
    }
    SpMat m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    direct_->lu.compute(m);
    if (direct_->lu.info() != Eigen::Success)
      throw SolverError("direct saddle factorization failed");
    direct_->ready = true;
  }

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs.head(nu) = ru;
  rhs.segment(nu, np) = rg;
  Eigen::VectorXd sol = direct_->lu.solve(rhs);

  SaddleResult res;
  res.stats.method = "direct-lu";
  finalize(res, ru, rg, sol.head(nu), sol.segment(nu, np));
  const double tol_ok = std::max(opt.rel_tol, 1e-11);
  res.stats.converged =
      res.stats.momentum_residual <= tol_ok && res.stats.divergence_residual <= tol_ok;
  return res;
}

}  // namespace stokes_homog
