#pragma once

#include "stokes_homog/effective_tensor.hpp"

namespace stokes_homog {

// Dirichlet velocity data: normal components live on the boundary faces of
// the full layout, tangential components in the trace slots.
struct BoundaryData {
  GridVelocity values;
  Eigen::VectorXd traces;

  static BoundaryData zero(const GridDesc& g) {
    BoundaryData b;
    b.values = GridVelocity(g);
    b.traces = Eigen::VectorXd::Zero(TraceLayout(g).total);
    return b;
  }
  static BoundaryData from_function(const GridDesc& g,
                                    const std::function<double(int, const Vec&)>& h);
  double l2_scale(const GridDesc& g) const;  // h^{(d-1)/2}-weighted trace norm
};

struct StokesProblem {
  BoxGrid domain;
  std::optional<ScaledField> oscillating;  // A(x/eps)
  std::optional<Tensor> constant_coeff;    // homogenized / constant tensor
  double eps = 0.0;                        // 0 for constant coefficients
  GridVelocity body_force;                 // F at faces
  GridPressure div_data;                   // g at cells
  BoundaryData boundary;                   // h on the walls
  // optional div(f) load, entry (j,b) evaluated at gradient sample positions
  std::function<double(int, int, const Vec&)> flux_source;

  static StokesProblem zero_data(const BoxGrid& grid) {
    StokesProblem p;
    p.domain = grid;
    GridDesc g(grid);
    p.body_force = GridVelocity(g);
    p.div_data = GridPressure(g);
    p.boundary = BoundaryData::zero(g);
    return p;
  }
  std::function<Tensor(const Vec&)> coefficient() const;
};

struct StokesSolution {
  GridVelocity u;
  GridPressure p;  // mean zero
  SaddleStats stats;
  double energy_ratio = 0.0;  // (|u|_H1 + |p|_L2) / data norms, recorded
};

// Signed discrete defect of the compatibility condition between the
// divergence data and the boundary flux.
double check_compatibility(const StokesProblem& problem);

StokesSolution solve_dirichlet(const StokesProblem& problem, double tol = 1e-10,
                               SaddleOptions::Method method = SaddleOptions::Method::kAuto,
                               const GridPressure* pressure_guess = nullptr);

StokesSolution solve_homogenized(const EffectiveTensor& hat, const StokesProblem& problem,
                                 double tol = 1e-10,
                                 SaddleOptions::Method method = SaddleOptions::Method::kAuto);

// The dilation covariance transform: v(x) = u(rx), pi(x) = r p(rx),
// div data r g(rx), momentum data r^2 F(rx), on the box of side L/r with the
// same lattice (every transformed sample is an original sample).
struct RescaledSystem {
  BoxGrid domain;
  double eps = 0.0;
  GridVelocity velocity;
  GridPressure pressure;
  GridVelocity momentum_data;
  GridPressure div_data;
};

RescaledSystem rescale_solution(const StokesProblem& problem, const StokesSolution& solution,
                                int r);

// Max-norm residuals (momentum, divergence) of the transformed tuple in the
// eps/r system, measured on rows whose stencils stay clear of the walls.
std::pair<double, double> rescaled_residual(const RescaledSystem& sys,
                                            const CoefficientField& base);

}  // namespace stokes_homog
