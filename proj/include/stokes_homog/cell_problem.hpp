#pragma once

#include <memory>

#include "stokes_homog/solvers.hpp"

namespace stokes_homog {

// Solutions of the d^2 periodic cell problems together with the linear fields
// they correct. Index (j, b) is flattened as j*d + b.
struct CorrectorSet {
  PeriodicGrid grid;
  CoefficientField field;
  double tol = 1e-10;
  std::vector<GridVelocity> chi;          // velocity correctors
  std::vector<GridPressure> pressure;     // cell pressures
  std::vector<double> momentum_residual;  // relative, per (j,b)
  std::vector<double> rhs_norm;           // l2 scale of each right-hand side
  std::vector<double> divergence_defect;  // l2 of div(chi)
  std::vector<double> chi_h1;             // recorded discrete norms
  std::vector<double> pi_l2;

  int dim() const { return grid.d; }
  int index(int j, int b) const { return j * grid.d + b; }

  // Sample of the linear field with unit gradient e_j x e^b (no wrap).
  GridVelocity linear_field(int j, int b) const;
};

// The operator and linear system are shared across the d^2 right-hand sides.
CorrectorSet solve_cell_problems(const CoefficientField& a, const PeriodicGrid& grid,
                                 double tol = 1e-10,
                                 SaddleOptions::Method method = SaddleOptions::Method::kAuto);

CorrectorSet solve_adjoint_cell_problems(const CoefficientField& a, const PeriodicGrid& grid,
                                         double tol = 1e-10,
                                         SaddleOptions::Method method =
                                             SaddleOptions::Method::kAuto);

// x -> eps * chi_j^b(x/eps) on the target grid. Exact when the scaled cell
// lattice tiles the target lattice (target.n * eps == grid.n); multilinear
// interpolation otherwise, reported through `interpolated`.
GridVelocity corrector_field_at_scale(const CorrectorSet& set, int j, int b, double eps,
                                      const GridDesc& target, bool* interpolated = nullptr);

}  // namespace stokes_homog
