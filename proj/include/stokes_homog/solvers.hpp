#pragma once

#include <memory>
#include <string>

#include "stokes_homog/operators.hpp"

namespace stokes_homog {

struct SaddleOptions {
  double rel_tol = 1e-10;
  int max_outer = 4000;
  int max_inner = 6000;
  enum class Method { kAuto, kDirect, kSchur };
  Method method = Method::kAuto;
  const GridPressure* pressure_guess = nullptr;
};

struct SaddleStats {
  double momentum_residual = 0.0;  // relative to the momentum data scale
  double divergence_residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  std::string method;
};

struct SaddleResult {
  GridVelocity u;
  GridPressure p;
  SaddleStats stats;
};

// Exact inverse of the constant-coefficient componentwise MAC Laplacian,
// diagonalized by DFT (torus) or DST-I/DST-II (box, homogeneous Dirichlet).
class ComponentLaplaceSolver {
 public:
  explicit ComponentLaplaceSolver(const GridDesc& g);
  ~ComponentLaplaceSolver();
  ComponentLaplaceSolver(const ComponentLaplaceSolver&) = delete;
  ComponentLaplaceSolver& operator=(const ComponentLaplaceSolver&) = delete;

  // rhs/out hold the component block (interior DOFs on the box).
  void solve(int comp, const double* rhs, double* out) const;
  MIdx block_shape(int comp) const;
  std::size_t block_size(int comp) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Interior/boundary DOF split of a velocity layout.
struct InteriorMap {
  VelocityLayout layout;
  std::vector<std::int64_t> full_to_interior;  // -1 at boundary faces
  std::vector<std::int64_t> interior_to_full;

  InteriorMap() = default;
  explicit InteriorMap(const GridDesc& g);
  std::size_t size() const { return interior_to_full.size(); }
};

// The discrete saddle system for one operator: momentum rows at interior
// faces, divergence rows at all cells. Solves by Schur-complement CG with
// componentwise fast-Poisson preconditioned inner solves (symmetric
// coefficients), or by a direct factorization of the bordered system.
class StokesLinearSystem {
 public:
  explicit StokesLinearSystem(std::shared_ptr<const DiscreteOperator> op);

  const GridDesc& grid() const { return op_->grid(); }
  const DiscreteOperator& op() const { return *op_; }
  bool symmetric() const { return symmetric_; }

  // momentum_rhs: pointwise values at faces (boundary rows ignored);
  // boundary_values: full-layout velocity with boundary faces set (box);
  // traces: tangential boundary traces (box), may be null for zero data.
  SaddleResult solve(const GridVelocity& momentum_rhs, const GridPressure& div_rhs,
                     const GridVelocity* boundary_values, const Eigen::VectorXd* traces,
                     const SaddleOptions& opt) const;

 private:
  std::shared_ptr<const DiscreteOperator> op_;
  double hd_ = 1.0;
  InteriorMap map_;
  SpMat Kii_, Kib_, Di_, Db_, T_;
  bool symmetric_ = false;
  std::unique_ptr<ComponentLaplaceSolver> fast_;

  struct DirectCache;
  mutable std::shared_ptr<DirectCache> direct_;

  SaddleResult solve_schur(const Eigen::VectorXd& ru, const Eigen::VectorXd& rg,
                           const SaddleOptions& opt) const;
  SaddleResult solve_direct(const Eigen::VectorXd& ru, const Eigen::VectorXd& rg,
                            const SaddleOptions& opt) const;
  void finalize(SaddleResult& res, const Eigen::VectorXd& ru, const Eigen::VectorXd& rg,
                const Eigen::VectorXd& ui, const Eigen::VectorXd& p) const;

  // Preconditioned CG on the interior velocity block, pointwise scaling.
  int pcg_velocity(const Eigen::VectorXd& rhs, Eigen::VectorXd& x, double tol) const;
  void project_velocity_means(Eigen::VectorXd& v) const;
};

}  // namespace stokes_homog
