#pragma once

#include "stokes_homog/stokes_solver.hpp"

namespace stokes_homog {

struct Window {
  enum class Type { kInterior, kBoundary };
  Type type = Type::kInterior;
  Vec center{0.5, 0.5, 0.0};
  std::vector<double> radii;  // increasing; outermost is the reference R
  int face_axis = 1;          // boundary windows: wall normal axis and side
  int face_side = 0;

  double outer_radius() const {
    if (radii.empty()) throw ValidationError("window: no radii");
    return radii.back();
  }
  void validate(const GridDesc& g) const;
};

struct EstimateConfig {
  double q = 4.0;  // default 2d so rho = 1 - d/q = 1/2
  double holder_rho = 0.5;
  std::vector<double> w1p_exponents{4.0 / 3.0, 2.0, 3.0, 4.0};
  double band = 0.25;
  std::uint64_t seed = 0;
  std::size_t pair_cap = 100000;

  double rho(int d) const {
    double r = 1.0 - d / q;
    if (!(r > 0.0 && r < 1.0))
      throw ValidationError("estimate config: rho = 1 - d/q must lie in (0,1)");
    return r;
  }
};

struct EstimateRow {
  double eps = 0.0;
  double r = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

struct EstimateReport {
  std::string id;
  std::vector<EstimateRow> rows;
  double max_ratio = 0.0;
  double trend_slope = 0.0;
  std::uint64_t spec_hash = 0;

  void finalize_summary();
  // relative variation of the per-eps max ratio against its value at the
  // largest eps in the report
  double band_spread() const;
  void append(const EstimateReport& other);
};

// Cellwise quantities every window estimate is built from.
struct SolutionFields {
  GridDesc grid;
  double eps = 0.0;
  std::vector<double> grad_sq;  // |grad u|^2
  std::vector<double> usq;      // |u|^2
  std::vector<double> pressure;
  std::vector<double> fmag;     // |F|
  std::vector<double> g;
  std::vector<double> fsrc_sq;  // |f|^2 for div(f) data

  static SolutionFields build(const StokesProblem& problem, const StokesSolution& solution);
};

EstimateReport interior_lipschitz_ratio(const SolutionFields& fields, const Window& window,
                                        const EstimateConfig& config);
EstimateReport pressure_oscillation_ratio(const SolutionFields& fields, const Window& window,
                                          const EstimateConfig& config);
// Requires Holder metadata on the coefficient family.
EstimateReport full_lipschitz_ratio(const StokesProblem& problem, const SolutionFields& fields,
                                    const Window& window, const EstimateConfig& config);
EstimateReport boundary_holder_decay(const SolutionFields& fields, const Window& window,
                                     double rho);
EstimateReport w1p_norm_sweep(const SolutionFields& fields, const std::vector<double>& qs);
EstimateReport caccioppoli_ratio(const SolutionFields& fields, const Window& window);

struct TwoScaleReport {
  double eps = 0.0;
  double l2_error = 0.0;
  double h1_error = 0.0;
  double corrected_h1_error = 0.0;
  std::vector<double> flux_defects;  // 10 fixed smooth test tensor fields
  double pressure_defect = 0.0;
};

TwoScaleReport two_scale_error(const StokesProblem& problem, const StokesSolution& eps_solution,
                               const StokesSolution& hom_solution, const EffectiveTensor& hat,
                               const CorrectorSet& cell, double eps);

struct LiouvilleReport {
  double momentum_residual = 0.0;   // L2 norm of the assembled field's residual
  double residual_scale = 0.0;      // corrector-residual budget for this member
  double divergence_defect = 0.0;   // L2 of div u - trace(E)
  int rank = 0;
  std::vector<double> singular_values;
};

LiouvilleReport liouville_verify(const CorrectorSet& set, const double* e_matrix,
                                 const double* h_vector, double h_pressure);

struct SublinearReport {
  std::vector<double> mean_gradient_norms;  // per family member
  int constant_rank = 0;                    // rank of the zero-mean-gradient subfamily
  bool pass = false;
};

SublinearReport sublinear_liouville_check(const CorrectorSet& set);

}  // namespace stokes_homog
