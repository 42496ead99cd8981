#pragma once

#include "stokes_homog/cell_problem.hpp"

namespace stokes_homog {

struct EffectiveTensor {
  int d = 2;
  Tensor entries;
  double mu_eff_lower = 0.0;
  double mu_eff_upper = 0.0;
  // provenance
  int grid_n = 0;
  double max_corrector_residual = 0.0;
};

struct EffectiveEllipticityReport {
  bool pass = false;
  double mu_eff_lower = 0.0;
  double mu_eff_upper = 0.0;
};

// Entries from the periodic energy form of the corrected linear fields,
// evaluated with the same quadrature as the operator assembly.
EffectiveTensor compute_effective(const CoefficientField& a, const CorrectorSet& set);

// Max entrywise discrepancy between the adjoint of the effective tensor of A
// and the effective tensor of the adjoint of A, both computed independently.
double check_duality(const CoefficientField& a, const PeriodicGrid& grid, double tol = 1e-10);

EffectiveEllipticityReport check_effective_ellipticity(const EffectiveTensor& hat,
                                                       double mu_input, double tol = 1e-8);

}  // namespace stokes_homog
