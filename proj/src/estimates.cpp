#include "stokes_homog/estimates.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numbers>
#include <random>

namespace stokes_homog {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::size_t> cells_in_ball(const GridDesc& g, const Vec& center, double r) {
  std::vector<std::size_t> out;
  MIdx cells{g.n, g.n, g.n};
  for_each_index(g.d, cells, [&](const MIdx& cell) {
    Vec x{0.0, 0.0, 0.0};
    for (int k = 0; k < g.d; ++k) x[k] = (cell[k] + 0.5) * g.h();
    if (dist2(x, center, g.d) <= r * r) out.push_back(flat_index(g.d, cells, cell));
  });
  if (out.empty()) throw ValidationError("estimate window is empty");
  return out;
}

double avg_over(const std::vector<double>& field, const std::vector<std::size_t>& cells) {
  double s = 0.0;
  for (std::size_t c : cells) s += field[c];
  return s / double(cells.size());
}

double sup_over(const std::vector<double>& field, const std::vector<std::size_t>& cells) {
  double s = 0.0;
  for (std::size_t c : cells) s = std::max(s, std::abs(field[c]));
  return s;
}

double lq_avg_over(const std::vector<double>& field, const std::vector<std::size_t>& cells,
                   double q) {
  double s = 0.0;
  for (std::size_t c : cells) s += std::pow(std::abs(field[c]), q);
  return std::pow(s / double(cells.size()), 1.0 / q);
}

Vec cell_center(const GridDesc& g, std::size_t flat) {
  MIdx cells{g.n, g.n, g.n};
  MIdx idx{0, 0, 0};
  std::size_t rem = flat;
  for (int k = g.d - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(rem % cells[k]);
    rem /= cells[k];
  }
  Vec x{0.0, 0.0, 0.0};
  for (int k = 0; k < g.d; ++k) x[k] = (idx[k] + 0.5) * g.h();
  return x;
}

// Holder seminorm of g over window cells; all pairs on coarse grids, seeded
// subsampling above the cap.
double holder_seminorm_window(const GridDesc& g, const std::vector<double>& field,
                              const std::vector<std::size_t>& cells, double rho,
                              std::uint64_t seed, std::size_t pair_cap) {
  const std::size_t n = cells.size();
  double best = 0.0;
  auto probe = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    Vec xa = cell_center(g, cells[a]), xb = cell_center(g, cells[b]);
    double dist = std::sqrt(dist2(xa, xb, g.d));
    if (dist <= 0.0) return;
    best = std::max(best, std::abs(field[cells[a]] - field[cells[b]]) / std::pow(dist, rho));
  };
  if (g.n <= 64 || n * (n - 1) / 2 <= pair_cap) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) probe(a, b);
  } else {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t k = 0; k < pair_cap; ++k) probe(pick(rng), pick(rng));
  }
  return best;
}

double safe_ratio(double lhs, double rhs) { return rhs > 0.0 ? lhs / rhs : 0.0; }

void check_radii(const Window& w, double eps, double h) {
  if (w.radii.empty()) throw ValidationError("estimate window has no radii");
  for (double r : w.radii) {
    if (eps > 0.0 && r < eps - 1e-12)
      throw ValidationError("estimate window radius below eps");
    if (r < h) throw ValidationError("estimate window radius below the grid scale");
  }
}

}  // namespace

void Window::validate(const GridDesc& g) const {
  if (radii.empty()) throw ValidationError("window: no radii");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (radii[k] <= radii[k - 1]) throw ValidationError("window: radii must increase");
  const double R = radii.back();
  if (type == Type::kInterior) {
    for (int k = 0; k < g.d; ++k) {
      double margin = std::min(center[k], g.length - center[k]);
      if (margin <= R) throw ValidationError("window: interior ball leaves the domain");
    }
  } else {
    double wall = face_side ? g.length : 0.0;
    if (std::abs(center[face_axis] - wall) > 1e-12)
      throw ValidationError("window: boundary window center is not on the face");
    for (int k = 0; k < g.d; ++k) {
      if (k == face_axis) continue;
      double margin = std::min(center[k], g.length - center[k]);
      if (margin <= R) throw ValidationError("window: boundary half-ball exceeds the face");
    }
  }
}

void EstimateReport::finalize_summary() {
  max_ratio = 0.0;
  for (const EstimateRow& row : rows) max_ratio = std::max(max_ratio, row.ratio);
  // slope of log(max ratio per eps) against log(1/eps)
  std::vector<std::pair<double, double>> pts;
  std::vector<double> eps_list;
  for (const EstimateRow& row : rows)
    if (row.eps > 0.0 &&
        std::find(eps_list.begin(), eps_list.end(), row.eps) == eps_list.end())
      eps_list.push_back(row.eps);
  for (double e : eps_list) {
    double m = 0.0;
    for (const EstimateRow& row : rows)
      if (row.eps == e) m = std::max(m, row.ratio);
    if (m > 0.0) pts.emplace_back(std::log(1.0 / e), std::log(m));
  }
  trend_slope = 0.0;
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double n = double(pts.size());
    trend_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
}

double EstimateReport::band_spread() const {
  std::vector<double> eps_list;
  for (const EstimateRow& row : rows)
    if (std::find(eps_list.begin(), eps_list.end(), row.eps) == eps_list.end())
      eps_list.push_back(row.eps);
  if (eps_list.size() < 2) return 0.0;
  double e0 = *std::max_element(eps_list.begin(), eps_list.end());
  auto max_at = [&](double e) {
    double m = 0.0;
    for (const EstimateRow& row : rows)
      if (row.eps == e) m = std::max(m, row.ratio);
    return m;
  };
  double base = max_at(e0);
  if (base <= 0.0) return 0.0;
  double spread = 0.0;
  for (double e : eps_list) spread = std::max(spread, std::abs(max_at(e) - base) / base);
  return spread;
}

void EstimateReport::append(const EstimateReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  finalize_summary();
}

SolutionFields SolutionFields::build(const StokesProblem& problem,
                                     const StokesSolution& solution) {
  GridDesc g(problem.domain);
  SolutionFields f;
  f.grid = g;
  f.eps = problem.oscillating ? problem.oscillating->eps() : 0.0;
  const int d = g.d;
  const std::size_t nc = g.cell_count();

  GradientSampling samp(g);
  Eigen::Map<const Eigen::VectorXd> uv(solution.u.data().data(), solution.u.data().size());
  Eigen::VectorXd grads = samp.G() * uv;
  if (samp.traces().total > 0 && problem.boundary.traces.size() > 0)
    grads += samp.Gb() * problem.boundary.traces;

  f.grad_sq.assign(nc, 0.0);
  f.usq.assign(nc, 0.0);
  f.fmag.assign(nc, 0.0);
  f.fsrc_sq.assign(nc, 0.0);
  f.pressure = solution.p.data();
  f.g = problem.div_data.data();

  MIdx cells{g.n, g.n, g.n};
  double grad[9];
  for_each_index(d, cells, [&](const MIdx& cell) {
    std::size_t id = flat_index(d, cells, cell);
    samp.cell_gradient(grads, cell, grad);
    double gs = 0.0;
    for (int k = 0; k < d * d; ++k) gs += grad[k] * grad[k];
    f.grad_sq[id] = gs;

    double us = 0.0, fs = 0.0;
    for (int c = 0; c < d; ++c) {
      MIdx hi = cell;
      hi[c] = g.periodic ? wrap(cell[c] + 1, g.n) : cell[c] + 1;
      double uc = 0.5 * (solution.u.at(c, cell) + solution.u.at(c, hi));
      double fc = 0.5 * (problem.body_force.at(c, cell) + problem.body_force.at(c, hi));
      us += uc * uc;
      fs += fc * fc;
    }
    f.usq[id] = us;
    f.fmag[id] = std::sqrt(fs);

    if (problem.flux_source) {
      Vec x = cell_center(g, id);
      double s = 0.0;
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < d; ++b) {
          double v = problem.flux_source(j, b, x);
          s += v * v;
        }
      f.fsrc_sq[id] = s;
    }
  });
  return f;
}

namespace {

// Shared right-hand side of the interior velocity/pressure window estimates:
// |grad u| average at scale R plus the g and F data terms.
double interior_rhs(const SolutionFields& f, const Window& w, const EstimateConfig& cfg,
                    const std::vector<std::size_t>& outer_cells) {
  const double R = w.outer_radius();
  const double rho = cfg.rho(f.grid.d);
  double rhs = std::sqrt(avg_over(f.grad_sq, outer_cells));
  rhs += sup_over(f.g, outer_cells);
  rhs += std::pow(R, rho) *
         holder_seminorm_window(f.grid, f.g, outer_cells, rho, cfg.seed, cfg.pair_cap);
  rhs += R * lq_avg_over(f.fmag, outer_cells, cfg.q);
  return rhs;
}

}  // namespace

EstimateReport interior_lipschitz_ratio(const SolutionFields& f, const Window& w,
                                        const EstimateConfig& cfg) {
  w.validate(f.grid);
  if (w.type != Window::Type::kInterior)
    throw ValidationError("interior estimate needs an interior window");
  check_radii(w, f.eps, f.grid.h());

  auto outer = cells_in_ball(f.grid, w.center, w.outer_radius());
  const double rhs = interior_rhs(f, w, cfg, outer);
  const double p_ref = avg_over(f.pressure, outer);

  EstimateReport rep;
  rep.id = "interior_lipschitz";
  for (double r : w.radii) {
    auto inner = cells_in_ball(f.grid, w.center, r);
    double posc = 0.0;
    for (std::size_t c : inner)
      posc += (f.pressure[c] - p_ref) * (f.pressure[c] - p_ref);
    posc = std::sqrt(posc / double(inner.size()));
    double lhs = std::sqrt(avg_over(f.grad_sq, inner)) + posc;
    rep.rows.push_back({f.eps, r, lhs, rhs, safe_ratio(lhs, rhs)});
  }
  rep.finalize_summary();
  return rep;
}

EstimateReport pressure_oscillation_ratio(const SolutionFields& f, const Window& w,
                                          const EstimateConfig& cfg) {
  w.validate(f.grid);
  if (w.type != Window::Type::kInterior)
    throw ValidationError("pressure estimate needs an interior window");
  check_radii(w, f.eps, f.grid.h());

  auto outer = cells_in_ball(f.grid, w.center, w.outer_radius());
  const double rhs = interior_rhs(f, w, cfg, outer);
  const double p_ref = avg_over(f.pressure, outer);

  EstimateReport rep;
  rep.id = "pressure_oscillation";
  for (double r : w.radii) {
    auto inner = cells_in_ball(f.grid, w.center, r);
    double posc = 0.0;
    for (std::size_t c : inner)
      posc += (f.pressure[c] - p_ref) * (f.pressure[c] - p_ref);
    double lhs = std::sqrt(posc / double(inner.size()));
    rep.rows.push_back({f.eps, r, lhs, rhs, safe_ratio(lhs, rhs)});
  }
  rep.finalize_summary();
  return rep;
}

EstimateReport full_lipschitz_ratio(const StokesProblem& problem, const SolutionFields& f,
                                    const Window& w, const EstimateConfig& cfg) {
  bool has_holder = problem.constant_coeff.has_value() ||
                    (problem.oscillating && problem.oscillating->base().holder());
  if (!has_holder)
    throw ValidationError("full Lipschitz estimate needs Holder metadata on the family");
  w.validate(f.grid);

  auto outer = cells_in_ball(f.grid, w.center, w.outer_radius());
  const double rhs = interior_rhs(f, w, cfg, outer);
  const double p_ref = avg_over(f.pressure, outer);
  const double half = 0.5 * w.outer_radius();

  EstimateReport rep;
  rep.id = "full_lipschitz";
  for (double r : w.radii) {
    double rr = std::min(r, half);  // sup norms live on B(x0, R/2)
    if (rr < f.grid.h()) continue;
    auto inner = cells_in_ball(f.grid, w.center, rr);
    double gmax = 0.0, pmax = 0.0;
    for (std::size_t c : inner) {
      gmax = std::max(gmax, std::sqrt(f.grad_sq[c]));
      pmax = std::max(pmax, std::abs(f.pressure[c] - p_ref));
    }
    double lhs = gmax + pmax;
    rep.rows.push_back({f.eps, rr, lhs, rhs, safe_ratio(lhs, rhs)});
  }
  rep.finalize_summary();
  return rep;
}

EstimateReport boundary_holder_decay(const SolutionFields& f, const Window& w, double rho) {
  w.validate(f.grid);
  if (w.type != Window::Type::kBoundary)
    throw ValidationError("boundary decay needs a boundary window");
  if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("boundary decay: rho must be in (0,1)");
  check_radii(w, f.eps, f.grid.h());

  auto outer = cells_in_ball(f.grid, w.center, w.outer_radius());
  // the window system must be homogeneous: F = 0, g = 0 inside
  for (std::size_t c : outer)
    if (std::abs(f.fmag[c]) > 1e-13 || std::abs(f.g[c]) > 1e-13 || f.fsrc_sq[c] > 1e-26)
      throw ValidationError("boundary decay: window must be free of volume data");

  const double R = w.outer_radius();
  const double base = std::sqrt(avg_over(f.grad_sq, outer));
  EstimateReport rep;
  rep.id = "boundary_holder";
  for (double r : w.radii) {
    auto inner = cells_in_ball(f.grid, w.center, r);
    double lhs = std::sqrt(avg_over(f.grad_sq, inner));
    double rhs = std::pow(r / R, rho - 1.0) * base;
    rep.rows.push_back({f.eps, r, lhs, rhs, safe_ratio(lhs, rhs)});
  }
  rep.finalize_summary();
  return rep;
}

EstimateReport w1p_norm_sweep(const SolutionFields& f, const std::vector<double>& qs) {
  const std::size_t nc = f.grid.cell_count();
  double hd = 1.0;
  for (int k = 0; k < f.grid.d; ++k) hd *= f.grid.h();

  EstimateReport rep;
  rep.id = "w1p";
  for (double q : qs) {
    if (!(q > 1.0 && q < 64.0)) throw ValidationError("w1p: exponent outside (1, 64)");
    double gq = 0.0, pq = 0.0, fq = 0.0, gsq = 0.0, srcq = 0.0;
    double pmean = 0.0;
    for (std::size_t c = 0; c < nc; ++c) pmean += f.pressure[c];
    pmean /= double(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      gq += std::pow(f.grad_sq[c], q / 2.0);
      pq += std::pow(std::abs(f.pressure[c] - pmean), q);
      fq += std::pow(f.fmag[c], q);
      gsq += std::pow(std::abs(f.g[c]), q);
      srcq += std::pow(f.fsrc_sq[c], q / 2.0);
    }
    double lhs = std::pow(gq * hd, 1.0 / q) + std::pow(pq * hd, 1.0 / q);
    double rhs = std::pow(fq * hd, 1.0 / q) + std::pow(gsq * hd, 1.0 / q) +
                 std::pow(srcq * hd, 1.0 / q);
    rep.rows.push_back({f.eps, q, lhs, rhs, safe_ratio(lhs, rhs)});
  }
  rep.finalize_summary();
  return rep;
}

EstimateReport caccioppoli_ratio(const SolutionFields& f, const Window& w) {
  w.validate(f.grid);
  const bool boundary = w.type == Window::Type::kBoundary;
  double hd = 1.0;
  for (int k = 0; k < f.grid.d; ++k) hd *= f.grid.h();

  EstimateReport rep;
  rep.id = boundary ? "caccioppoli_boundary" : "caccioppoli_interior";
  for (double r : w.radii) {
    // interior windows compare B and 2B; boundary windows B_{r/2} and B_r
    double r_in = boundary ? 0.5 * r : r;
    double r_out = boundary ? r : 2.0 * r;
    if (!boundary) {
      for (int k = 0; k < f.grid.d; ++k)
        if (std::min(w.center[k], f.grid.length - w.center[k]) <= r_out)
          throw ValidationError("caccioppoli: doubled ball leaves the domain");
    }
    if (r_in < f.grid.h()) continue;
    auto inner = cells_in_ball(f.grid, w.center, r_in);
    auto outer = cells_in_ball(f.grid, w.center, r_out);

    double p_ref = avg_over(f.pressure, inner);
    double lhs = 0.0;
    for (std::size_t c : inner) {
      lhs += f.grad_sq[c];
      if (!boundary) lhs += (f.pressure[c] - p_ref) * (f.pressure[c] - p_ref);
    }
    lhs *= hd;
    double rhs = 0.0;
    for (std::size_t c : outer)
      rhs += f.usq[c] / (r * r) + f.fsrc_sq[c] + f.g[c] * f.g[c] + r * r * f.fmag[c] * f.fmag[c];
    rhs *= hd;
    rep.rows.push_back({f.eps, r, lhs, rhs, safe_ratio(lhs, rhs)});
  }
  rep.finalize_summary();
  return rep;
}

TwoScaleReport two_scale_error(const StokesProblem& problem, const StokesSolution& eps_solution,
                               const StokesSolution& hom_solution, const EffectiveTensor& hat,
                               const CorrectorSet& cell, double eps) {
  GridDesc g(problem.domain);
  const int d = g.d;
  const double cells_per_period = eps / g.h();
  if (std::abs(cells_per_period - cell.grid.n) > 1e-9)
    throw ValidationError("two_scale_error: cell grid does not tile the target grid");

  TwoScaleReport rep;
  rep.eps = eps;
  rep.l2_error = l2_dist(eps_solution.u, hom_solution.u);

  GradientSampling samp(g);
  Eigen::Map<const Eigen::VectorXd> ue(eps_solution.u.data().data(),
                                       eps_solution.u.data().size());
  Eigen::Map<const Eigen::VectorXd> u0(hom_solution.u.data().data(),
                                       hom_solution.u.data().size());
  Eigen::VectorXd diff_samples = samp.G() * (ue - u0);
  double h1sq = 0.0;
  for (std::size_t k = 0; k < samp.sample_count(); ++k)
    h1sq += samp.weights()[k] * diff_samples[k] * diff_samples[k];
  rep.h1_error = std::sqrt(rep.l2_error * rep.l2_error + h1sq);

  // per-cell gradient of the homogenized solution, averaged to faces
  MIdx cells{g.n, g.n, g.n};
  const std::size_t nc = g.cell_count();
  Eigen::VectorXd grads0 = samp.G() * u0;
  std::vector<double> grad0(nc * d * d);
  for_each_index(d, cells, [&](const MIdx& cellidx) {
    samp.cell_gradient(grads0, cellidx, grad0.data() + flat_index(d, cells, cellidx) * d * d);
  });
  auto grad0_at_face = [&](int comp, const MIdx& idx, int j, int b) {
    // average the adjacent cell values along the face normal
    MIdx lo = idx, hi = idx;
    lo[comp] = idx[comp] - 1;
    double acc = 0.0;
    int cnt = 0;
    for (const MIdx* c : {&lo, &hi}) {
      MIdx cc = *c;
      if (g.periodic) cc[comp] = wrap(cc[comp], g.n);
      if (cc[comp] < 0 || cc[comp] >= g.n) continue;
      acc += grad0[flat_index(d, cells, cc) * d * d + j * d + b];
      ++cnt;
    }
    return cnt ? acc / cnt : 0.0;
  };

  GridVelocity corrected{g};
  for (std::size_t k = 0; k < corrected.data().size(); ++k)
    corrected.data()[k] = eps_solution.u.data()[k] - hom_solution.u.data()[k];
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      GridVelocity tile = corrector_field_at_scale(cell, j, b, eps, g);
      const VelocityLayout& lay = corrected.layout();
      for (int c = 0; c < d; ++c)
        for_each_index(d, lay.shape[c], [&](const MIdx& idx) {
          corrected.at(c, idx) -= tile.at(c, idx) * grad0_at_face(c, idx, j, b);
        });
    }
  Eigen::Map<const Eigen::VectorXd> cw(corrected.data().data(), corrected.data().size());
  Eigen::VectorXd csamples = samp.G() * cw;
  double ch1 = 0.0;
  for (std::size_t k = 0; k < samp.sample_count(); ++k)
    ch1 += samp.weights()[k] * csamples[k] * csamples[k];
  double cl2 = l2_norm(corrected);
  rep.corrected_h1_error = std::sqrt(cl2 * cl2 + ch1);

  // flux pairing defects against a fixed panel of smooth tensor fields
  Eigen::VectorXd gradse = samp.G() * ue;
  std::vector<double> grade(nc * d * d);
  for_each_index(d, cells, [&](const MIdx& cellidx) {
    samp.cell_gradient(gradse, cellidx, grade.data() + flat_index(d, cells, cellidx) * d * d);
  });
  auto coeff = problem.coefficient();
  double hd = 1.0;
  for (int k = 0; k < d; ++k) hd *= g.h();

  const int panel = 10;
  rep.flux_defects.assign(panel, 0.0);
  const int waves[5][2] = {{1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}};
  for (std::size_t c = 0; c < nc; ++c) {
    Vec x = cell_center(g, c);
    Tensor a = coeff(x);
    double flux_e[9] = {0}, flux_0[9] = {0};
    for (int i = 0; i < d; ++i)
      for (int al = 0; al < d; ++al)
        for (int j = 0; j < d; ++j)
          for (int b = 0; b < d; ++b) {
            flux_e[i * d + al] += a(i, j, al, b) * grade[c * d * d + j * d + b];
            flux_0[i * d + al] += hat.entries(i, j, al, b) * grad0[c * d * d + j * d + b];
          }
    for (int t = 0; t < panel; ++t) {
      const int* wv = waves[t % 5];
      double phase0 = 0.4 * t;
      double dot = wv[0] * x[0] + wv[1] * x[1];
      for (int i = 0; i < d; ++i)
        for (int al = 0; al < d; ++al) {
          double phi = std::cos(kTwoPi * dot + phase0 + 0.5 * i + 0.7 * al);
          rep.flux_defects[t] += (flux_e[i * d + al] - flux_0[i * d + al]) * phi * hd;
        }
    }
  }
  for (double& v : rep.flux_defects) v = std::abs(v);

  double pd = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    Vec x = cell_center(g, c);
    double phi = std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[1]);
    pd += (eps_solution.p.data()[c] - hom_solution.p.data()[c]) * phi * hd;
  }
  rep.pressure_defect = std::abs(pd);
  return rep;
}

LiouvilleReport liouville_verify(const CorrectorSet& set, const double* e_matrix,
                                 const double* h_vector, double h_pressure) {
  const int d = set.grid.d;
  GridDesc g(set.grid);
  const CoefficientField& a = set.field;
  DiscreteOperator op(g, [&a](const Vec& x) { return a.evaluate(x); });
  double hd = 1.0;
  for (int k = 0; k < d; ++k) hd *= g.h();

  GridVelocity u_per{g};  // periodic part: sum E_jb chi_jb (+ constant H)
  GridPressure p{g};
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      double e = e_matrix[j * d + b];
      if (e == 0.0) continue;
      int id = set.index(j, b);
      for (std::size_t k = 0; k < u_per.data().size(); ++k)
        u_per.data()[k] += e * set.chi[id].data()[k];
      for (std::size_t k = 0; k < p.data().size(); ++k)
        p.data()[k] += e * set.pressure[id].data()[k];
    }
  const VelocityLayout& lay = u_per.layout();
  for (int c = 0; c < d; ++c)
    for (std::size_t k = lay.offset[c]; k < lay.offset[c + 1]; ++k)
      u_per.data()[k] += h_vector[c];
  for (double& v : p.data()) v += h_pressure;

  // L(u) + grad(p) with the affine part of u applied through its constant
  // gradient (grid samples of the linear field would wrap at the seam)
  GridVelocity lu = op.apply(u_per);
  Eigen::VectorXd aff = op.affine_load(e_matrix) / hd;
  GridVelocity gp = gradient(p);
  double res2 = 0.0;
  for (std::size_t k = 0; k < lu.data().size(); ++k) {
    double r = lu.data()[k] + aff[k] + gp.data()[k];
    res2 += r * r;
  }

  LiouvilleReport rep;
  rep.momentum_residual = std::sqrt(res2 * hd);
  double budget = 0.0;
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      int id = set.index(j, b);
      budget += std::abs(e_matrix[j * d + b]) * set.momentum_residual[id] * set.rhs_norm[id];
    }
  rep.residual_scale = budget * std::sqrt(hd);
  rep.divergence_defect = l2_norm(divergence(u_per));

  // numerical rank of the full d^2 + d + 1 member family
  const std::size_t nu = u_per.data().size();
  const std::size_t np = p.data().size();
  const int members = d * d + d + 1;
  Eigen::MatrixXd family(nu + np, members);
  family.setZero();
  int col = 0;
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b, ++col) {
      GridVelocity lin = set.linear_field(j, b);
      int id = set.index(j, b);
      for (std::size_t k = 0; k < nu; ++k)
        family(k, col) = lin.data()[k] + set.chi[id].data()[k];
      for (std::size_t k = 0; k < np; ++k)
        family(nu + k, col) = set.pressure[id].data()[k];
    }
  for (int c = 0; c < d; ++c, ++col)
    for (std::size_t k = lay.offset[c]; k < lay.offset[c + 1]; ++k) family(k, col) = 1.0;
  family(nu, col) = 1.0;  // constant pressure member
  for (std::size_t k = 0; k < np; ++k) family(nu + k, col) = 1.0;
  for (int c = 0; c < members; ++c) family.col(c).normalize();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(family);
  rep.singular_values.assign(svd.singularValues().data(),
                             svd.singularValues().data() + members);
  rep.rank = 0;
  for (double s : rep.singular_values)
    if (s > 1e-8 * rep.singular_values.front()) ++rep.rank;
  return rep;
}

SublinearReport sublinear_liouville_check(const CorrectorSet& set) {
  const int d = set.grid.d;
  GridDesc g(set.grid);
  GradientSampling samp(g);
  double hd = 1.0;
  for (int k = 0; k < d; ++k) hd *= g.h();

  SublinearReport rep;
  const int members = d * d + d + 1;
  std::vector<int> constant_members;
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      // mean gradient of P_jb + chi_jb = E_jb + mean grad chi (the latter
      // telescopes to zero on the torus)
      Eigen::Map<const Eigen::VectorXd> cv(set.chi[set.index(j, b)].data().data(),
                                           set.chi[set.index(j, b)].data().size());
      Eigen::VectorXd s = samp.G() * cv;
      double mean_entries[9] = {0};
      for (std::size_t k = 0; k < samp.sample_count(); ++k) {
        // accumulate per-entry weighted means via cell_gradient is overkill;
        // weighted sum of samples grouped by entry:
        (void)k;
      }
      // entry-wise weighted means
      Eigen::VectorXd weighted = s;
      for (std::size_t k = 0; k < samp.sample_count(); ++k)
        weighted[k] *= samp.weights()[k];
      // diag entries
      MIdx cells{g.n, g.n, g.n};
      for_each_index(d, cells, [&](const MIdx& cell) {
        for (int bb = 0; bb < d; ++bb)
          mean_entries[bb * d + bb] += weighted[samp.diag_sample(cell, bb)];
      });
      for (std::size_t li = 0; li < samp.mixed().size(); ++li) {
        const auto& lat = samp.mixed()[li];
        for_each_index(d, lat.shape, [&](const MIdx& nu) {
          for (int slot = 0; slot < 2; ++slot) {
            int jj = lat.entries[slot][0], bb = lat.entries[slot][1];
            std::size_t id = lat.offset + flat_index(d, lat.shape, nu) * 2 + slot;
            mean_entries[jj * d + bb] += weighted[id];
          }
        });
      }
      double norm = 0.0;
      for (int k = 0; k < d * d; ++k) {
        double m = mean_entries[k];  // integral over Y (|Y| = 1)
        m += (k == j * d + b) ? 1.0 : 0.0;
        norm += m * m;
      }
      rep.mean_gradient_norms.push_back(std::sqrt(norm));
    }
  for (int c = 0; c < d + 1; ++c) rep.mean_gradient_norms.push_back(0.0);

  for (int m = 0; m < members; ++m)
    if (rep.mean_gradient_norms[m] <= 1e-8) constant_members.push_back(m);
  rep.constant_rank = static_cast<int>(constant_members.size());
  rep.pass = rep.constant_rank == d + 1;
  // the d^2 corrected linear members must all be non-constant
  for (int m = 0; m < d * d; ++m)
    if (rep.mean_gradient_norms[m] <= 1e-8) rep.pass = false;
  return rep;
}

}  // namespace stokes_homog
