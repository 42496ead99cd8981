#pragma once

#include <Eigen/Sparse>

#include <functional>

#include "stokes_homog/grid.hpp"
#include "stokes_homog/tensor.hpp"

namespace stokes_homog {

using SpMat = Eigen::SparseMatrix<double>;

// Tangential Dirichlet traces on the box boundary. Normal components live on
// boundary faces of the velocity layout itself; these slots hold the remaining
// components, sampled where the ghost-cell elimination needs them.
struct TraceLayout {
  GridDesc grid;
  std::array<std::array<std::array<std::size_t, 3>, 2>, 3> offset{};
  std::array<std::array<std::array<MIdx, 3>, 2>, 3> shape{};
  std::size_t total = 0;

  TraceLayout() = default;
  explicit TraceLayout(const GridDesc& g);

  // In-face index: full d-dimensional multi-index whose component along `axis`
  // is ignored.
  std::size_t index(int axis, int side, int comp, const MIdx& idx) const;
  Vec position(int axis, int side, int comp, const MIdx& idx) const;
  template <typename F>
  void for_each(F&& body) const {
    const int d = grid.d;
    for (int a = 0; a < d; ++a)
      for (int s = 0; s < 2; ++s)
        for (int c = 0; c < d; ++c) {
          if (c == a) continue;
          MIdx sh = shape[a][s][c];
          MIdx iter = sh;
          iter[a] = 1;
          for_each_index(d, iter, [&](const MIdx& idx) { body(a, s, c, idx); });
        }
  }
};

// Staggered gradient samples: the d diagonal entries d_b u^b per cell at cell
// centers, and the mixed entries (j,b), j != b, on the node/edge lattices.
// The quadrature pairs every cell with each of its 2^d corners; the full
// coefficient tensor is sampled at the corner, so pointwise ellipticity gives
// the discrete bound a(u,u) >= mu * sum_s weight_s (Gu)_s^2 exactly.
class GradientSampling {
 public:
  explicit GradientSampling(const GridDesc& g);

  const GridDesc& grid() const { return grid_; }
  std::size_t sample_count() const { return total_; }
  const std::vector<double>& weights() const { return weight_; }
  const SpMat& G() const { return G_; }
  const SpMat& Gb() const { return Gb_; }
  const TraceLayout& traces() const { return traces_; }

  struct MixedLattice {
    int axis = 2;                    // edge direction (3D); unused in 2D
    MIdx shape{};
    std::size_t offset = 0;
    std::array<std::array<int, 2>, 2> entries{};  // {j, b} per slot
  };
  const std::vector<MixedLattice>& mixed() const { return mixed_; }

  std::size_t diag_sample(const MIdx& cell, int b) const {
    return flat_index(grid_.d, cell_shape(), cell) * grid_.d + b;
  }
  Vec sample_position(std::size_t s) const { return position_[s]; }

  // Quadrature matrix of a coefficient field: a(u,v) = (Gv)^T W (Gu), weights
  // included. Zero tensor entries are skipped.
  SpMat build_w(const std::function<Tensor(const Vec&)>& coeff) const;

  // Gradient samples of the affine field u^b = sum_j E[j*d+b] y_j.
  Eigen::VectorXd affine_samples(const double* e_matrix) const;

  // Samples of an analytic tensor field f (for div(f) right-hand sides),
  // entry (j,b) evaluated at its sample position.
  Eigen::VectorXd tensor_field_samples(
      const std::function<double(int j, int b, const Vec&)>& f) const;

  // d x d gradient tensor of one cell, mixed entries averaged to the center;
  // out[j*d+b] = d_j u^b.
  void cell_gradient(const Eigen::VectorXd& samples, const MIdx& cell, double* out) const;

  MIdx cell_shape() const { return {grid_.n, grid_.n, grid_.n}; }

 private:
  GridDesc grid_;
  VelocityLayout vel_;
  TraceLayout traces_;
  std::vector<MixedLattice> mixed_;
  std::size_t total_ = 0;
  std::vector<double> weight_;
  std::vector<Vec> position_;
  SpMat G_, Gb_;

  std::size_t mixed_sample(int lattice, const MIdx& idx, int slot) const {
    return mixed_[lattice].offset +
           flat_index(grid_.d, mixed_[lattice].shape, idx) * 2 + slot;
  }
  friend class DiscreteOperator;
};

// Discrete -div(A grad .) with its energy form.
class DiscreteOperator {
 public:
  DiscreteOperator(const GridDesc& g, std::function<Tensor(const Vec&)> coeff);
  DiscreteOperator(const PeriodicGrid& g, const CoefficientField& field)
      : DiscreteOperator(GridDesc(g), [field](const Vec& x) { return field.evaluate(x); }) {}
  DiscreteOperator(const BoxGrid& g, const ScaledField& field)
      : DiscreteOperator(GridDesc(g), [field](const Vec& x) { return field.evaluate(x); }) {
    double cells_per_period = field.eps() / GridDesc(g).h();
    if (std::abs(cells_per_period - std::round(cells_per_period)) > 1e-12 ||
        cells_per_period < 1.0)
      throw ValidationError("operator: eps must be an integer number of grid cells");
  }

  const GridDesc& grid() const { return sampling_.grid(); }
  const GradientSampling& sampling() const { return sampling_; }
  const SpMat& stiffness() const { return K_; }  // energy-scaled: v^T K u = a(u,v)
  const SpMat& W() const { return W_; }

  // Pointwise operator values; box rows touching boundary data assume zero
  // Dirichlet data (solvers fold inhomogeneous data into the right-hand side).
  GridVelocity apply(const GridVelocity& u) const;
  double form(const GridVelocity& u, const GridVelocity& v) const;
  double grad_norm_sq(const GridVelocity& u) const;  // sum_s w_s (Gu)_s^2

  Eigen::VectorXd gradient_samples(const GridVelocity& u) const;
  // Energy-scaled residual contribution of the affine field with gradient E:
  // returns G^T W (affine samples), so the cell-problem RHS is -rhs/h^d.
  Eigen::VectorXd affine_load(const double* e_matrix) const;

 private:
  GradientSampling sampling_;
  SpMat W_, K_;
};

GridPressure divergence(const GridVelocity& u);
GridVelocity gradient(const GridPressure& p);

// Sparse divergence matrix (cells x velocity DOFs), 1/h differences.
SpMat divergence_matrix(const GridDesc& g);

GridVelocity apply_operator(const CoefficientField& field, const GridVelocity& u);
GridVelocity apply_operator(const ScaledField& field, const GridVelocity& u);

// Mean over grid cells whose centers lie in B(center, r).
double window_average(const GridPressure& field, const Vec& center, double r);
double window_average(const GridDesc& g, const std::vector<double>& cell_values,
                      const Vec& center, double r);

}  // namespace stokes_homog
