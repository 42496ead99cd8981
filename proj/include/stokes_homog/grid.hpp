#pragma once

#include <functional>
#include <vector>

#include "stokes_homog/common.hpp"

namespace stokes_homog {

// Unit cell Y = [0,1)^d, MAC layout: component b on b-faces, pressure at centers.
struct PeriodicGrid {
  int d = 2;
  int n = 0;
  PeriodicGrid() = default;
  PeriodicGrid(int d_, int n_) : d(d_), n(n_) {
    if (d != 2 && d != 3) throw ValidationError("grid: dimension must be 2 or 3");
    if (n < 4) throw ValidationError("grid: resolution must be at least 4");
  }
  double h() const { return 1.0 / n; }
};

// Box (0,L)^d with the same staggered layout; normal-velocity faces on the
// boundary are part of the DOF vector and carry Dirichlet data.
struct BoxGrid {
  int d = 2;
  int n = 0;
  double length = 1.0;
  BoxGrid() = default;
  BoxGrid(int d_, int n_, double length_ = 1.0) : d(d_), n(n_), length(length_) {
    if (d != 2 && d != 3) throw ValidationError("grid: dimension must be 2 or 3");
    if (n < 4) throw ValidationError("grid: resolution must be at least 4");
    if (length <= 0.0) throw ValidationError("grid: box length must be positive");
  }
  double h() const { return length / n; }
};

struct GridDesc {
  bool periodic = true;
  int d = 2;
  int n = 0;
  double length = 1.0;

  GridDesc() = default;
  GridDesc(const PeriodicGrid& g) : periodic(true), d(g.d), n(g.n), length(1.0) {}
  GridDesc(const BoxGrid& g) : periodic(false), d(g.d), n(g.n), length(g.length) {}

  double h() const { return length / n; }
  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int k = 0; k < d; ++k) c *= n;
    return c;
  }
  bool operator==(const GridDesc& o) const {
    return periodic == o.periodic && d == o.d && n == o.n && length == o.length;
  }
};

// Flat storage layout of the velocity DOFs, component-major.
struct VelocityLayout {
  GridDesc grid;
  std::array<MIdx, 3> shape{};        // shape[comp][axis]
  std::array<std::size_t, 4> offset{};  // offset[comp]; offset[d] = total size

  VelocityLayout() = default;
  explicit VelocityLayout(const GridDesc& g) : grid(g) {
    std::size_t off = 0;
    for (int c = 0; c < g.d; ++c) {
      std::size_t sz = 1;
      for (int k = 0; k < g.d; ++k) {
        shape[c][k] = (k == c && !g.periodic) ? g.n + 1 : g.n;
        sz *= shape[c][k];
      }
      offset[c] = off;
      off += sz;
    }
    offset[g.d] = off;
  }

  std::size_t size() const { return offset[grid.d]; }
  std::size_t index(int comp, const MIdx& idx) const {
    return offset[comp] + flat_index(grid.d, shape[comp], idx);
  }
  Vec position(int comp, const MIdx& idx) const {
    Vec x{0.0, 0.0, 0.0};
    for (int k = 0; k < grid.d; ++k)
      x[k] = (k == comp) ? idx[k] * grid.h() : (idx[k] + 0.5) * grid.h();
    return x;
  }
  bool on_boundary(int comp, const MIdx& idx) const {
    return !grid.periodic && (idx[comp] == 0 || idx[comp] == grid.n);
  }
};

class GridVelocity {
 public:
  GridVelocity() = default;
  explicit GridVelocity(const GridDesc& g) : layout_(g), data_(layout_.size(), 0.0) {}

  const GridDesc& grid() const { return layout_.grid; }
  const VelocityLayout& layout() const { return layout_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& at(int comp, const MIdx& idx) { return data_[layout_.index(comp, idx)]; }
  double at(int comp, const MIdx& idx) const { return data_[layout_.index(comp, idx)]; }

  void fill_from(const std::function<double(int, const Vec&)>& f) {
    for (int c = 0; c < grid().d; ++c)
      for_each_index(grid().d, layout_.shape[c], [&](const MIdx& idx) {
        at(c, idx) = f(c, layout_.position(c, idx));
      });
  }

 private:
  VelocityLayout layout_;
  std::vector<double> data_;
};

class GridPressure {
 public:
  GridPressure() = default;
  explicit GridPressure(const GridDesc& g) : grid_(g), data_(g.cell_count(), 0.0) {}

  const GridDesc& grid() const { return grid_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  MIdx shape() const { return {grid_.n, grid_.n, grid_.n}; }
  double& at(const MIdx& idx) { return data_[flat_index(grid_.d, shape(), idx)]; }
  double at(const MIdx& idx) const { return data_[flat_index(grid_.d, shape(), idx)]; }
  Vec center(const MIdx& idx) const {
    Vec x{0.0, 0.0, 0.0};
    for (int k = 0; k < grid_.d; ++k) x[k] = (idx[k] + 0.5) * grid_.h();
    return x;
  }

  void fill_from(const std::function<double(const Vec&)>& f) {
    for_each_index(grid_.d, shape(), [&](const MIdx& idx) { at(idx) = f(center(idx)); });
  }

 private:
  GridDesc grid_;
  std::vector<double> data_;
};

double mean(const GridPressure& p);
void subtract_mean(GridPressure& p);
// Component means over the stored DOFs (periodic grids only have interior DOFs).
std::array<double, 3> component_means(const GridVelocity& u);
void subtract_component_means(GridVelocity& u);

double l2_norm(const GridVelocity& u);
double l2_norm(const GridPressure& p);
double l2_dist(const GridVelocity& a, const GridVelocity& b);

// Multilinear interpolation of one velocity component of a periodic grid
// function at an arbitrary point (periodic wrap).
double interpolate_component(const GridVelocity& u, int comp, const Vec& x);
double interpolate_pressure(const GridPressure& p, const Vec& x);

}  // namespace stokes_homog
