#include "stokes_homog/operators.hpp"

#include <vector>

namespace stokes_homog {

TraceLayout::TraceLayout(const GridDesc& g) : grid(g) {
  if (g.periodic) return;
  const int d = g.d;
  std::size_t off = 0;
  for (int a = 0; a < d; ++a)
    for (int s = 0; s < 2; ++s)
      for (int c = 0; c < d; ++c) {
        if (c == a) continue;
        MIdx sh{1, 1, 1};
        for (int k = 0; k < d; ++k) {
          if (k == a) continue;
          sh[k] = (k == c) ? g.n + 1 : g.n;
        }
        shape[a][s][c] = sh;
        offset[a][s][c] = off;
        std::size_t sz = 1;
        for (int k = 0; k < d; ++k)
          if (k != a) sz *= sh[k];
        off += sz;
      }
  total = off;
}

std::size_t TraceLayout::index(int axis, int side, int comp, const MIdx& idx) const {
  std::size_t f = 0;
  for (int k = 0; k < grid.d; ++k) {
    if (k == axis) continue;
    f = f * shape[axis][side][comp][k] + idx[k];
  }
  return offset[axis][side][comp] + f;
}

Vec TraceLayout::position(int axis, int side, int comp, const MIdx& idx) const {
  Vec x{0.0, 0.0, 0.0};
  for (int k = 0; k < grid.d; ++k) {
    if (k == axis)
      x[k] = side ? grid.length : 0.0;
    else
      x[k] = (k == comp) ? idx[k] * grid.h() : (idx[k] + 0.5) * grid.h();
  }
  return x;
}

namespace {

int third_axis(int j, int b) { return 3 - j - b; }

}  // namespace

GradientSampling::GradientSampling(const GridDesc& g)
    : grid_(g), vel_(g), traces_(g) {
  const int d = g.d;
  const int n = g.n;
  const double h = g.h();
  const std::size_t cells = g.cell_count();

  std::size_t off = cells * d;
  if (d == 2) {
    MixedLattice lat;
    lat.axis = 2;
    lat.shape = {g.periodic ? n : n + 1, g.periodic ? n : n + 1, 1};
    lat.offset = off;
    lat.entries = {{{0, 1}, {1, 0}}};
    std::size_t sz = std::size_t(lat.shape[0]) * lat.shape[1];
    off += sz * 2;
    mixed_.push_back(lat);
  } else {
    for (int k = 0; k < 3; ++k) {
      MixedLattice lat;
      lat.axis = k;
      for (int a = 0; a < 3; ++a) lat.shape[a] = (a == k || g.periodic) ? n : n + 1;
      lat.offset = off;
      int j = (k == 0) ? 1 : 0;
      int b = (k == 2) ? 1 : 2;
      lat.entries = {{{j, b}, {b, j}}};
      std::size_t sz = std::size_t(lat.shape[0]) * lat.shape[1] * lat.shape[2];
      off += sz * 2;
      mixed_.push_back(lat);
    }
  }
  total_ = off;
  weight_.assign(total_, 0.0);
  position_.assign(total_, Vec{0.0, 0.0, 0.0});

  std::vector<Eigen::Triplet<double>> tg, tgb;
  // Diagonal entries d_b u^b at cell centers.
  for_each_index(d, cell_shape(), [&](const MIdx& cell) {
    for (int b = 0; b < d; ++b) {
      std::size_t s = diag_sample(cell, b);
      MIdx lo = cell, hi = cell;
      hi[b] = g.periodic ? wrap(cell[b] + 1, n) : cell[b] + 1;
      tg.emplace_back(s, vel_.index(b, hi), 1.0 / h);
      tg.emplace_back(s, vel_.index(b, lo), -1.0 / h);
      Vec c{0.0, 0.0, 0.0};
      for (int k = 0; k < d; ++k) c[k] = (cell[k] + 0.5) * h;
      position_[s] = c;
    }
  });
  // Mixed entries d_j u^b on node/edge lattices, ghost elimination at walls.
  for (std::size_t li = 0; li < mixed_.size(); ++li) {
    const MixedLattice& lat = mixed_[li];
    for_each_index(d, lat.shape, [&](const MIdx& nu) {
      for (int slot = 0; slot < 2; ++slot) {
        const int j = lat.entries[slot][0];
        const int b = lat.entries[slot][1];
        std::size_t s = mixed_sample(int(li), nu, slot);
        Vec pos{0.0, 0.0, 0.0};
        for (int k = 0; k < d; ++k)
          pos[k] = (d == 3 && k == lat.axis) ? (nu[k] + 0.5) * h : nu[k] * h;
        position_[s] = pos;

        MIdx hi = nu, lo = nu;
        lo[j] = nu[j] - 1;
        if (g.periodic) {
          hi[j] = wrap(hi[j], n);
          lo[j] = wrap(lo[j], n);
          tg.emplace_back(s, vel_.index(b, hi), 1.0 / h);
          tg.emplace_back(s, vel_.index(b, lo), -1.0 / h);
        } else if (nu[j] == 0) {
          MIdx in = nu;
          in[j] = 0;
          tg.emplace_back(s, vel_.index(b, in), 2.0 / h);
          tgb.emplace_back(s, traces_.index(j, 0, b, nu), -2.0 / h);
        } else if (nu[j] == n) {
          MIdx in = nu;
          in[j] = n - 1;
          tg.emplace_back(s, vel_.index(b, in), -2.0 / h);
          tgb.emplace_back(s, traces_.index(j, 1, b, nu), 2.0 / h);
        } else {
          tg.emplace_back(s, vel_.index(b, hi), 1.0 / h);
          tg.emplace_back(s, vel_.index(b, lo), -1.0 / h);
        }
      }
    });
  }

  G_.resize(total_, vel_.size());
  G_.setFromTriplets(tg.begin(), tg.end());
  Gb_.resize(total_, traces_.total);
  if (!tgb.empty()) Gb_.setFromTriplets(tgb.begin(), tgb.end());

  // Pair-incidence weights: h^d / 2^d per (cell, corner) pair.
  double wpair = 1.0;
  for (int k = 0; k < d; ++k) wpair *= h / 2.0;
  for_each_index(d, cell_shape(), [&](const MIdx& cell) {
    for (int bits = 0; bits < (1 << d); ++bits) {
      for (int b = 0; b < d; ++b) weight_[diag_sample(cell, b)] += wpair;
      MIdx corner = cell;
      for (int k = 0; k < d; ++k) corner[k] += (bits >> k) & 1;
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < d; ++b) {
          if (j == b) continue;
          int li = (d == 2) ? 0 : third_axis(j, b);
          MIdx idx = corner;
          if (d == 3) idx[mixed_[li].axis] = cell[mixed_[li].axis];
          if (g.periodic)
            for (int k = 0; k < d; ++k) idx[k] = wrap(idx[k], n);
          int slot;
          if (d == 2)
            slot = (j == 0) ? 0 : 1;
          else
            slot = (mixed_[li].entries[0][0] == j) ? 0 : 1;
          weight_[mixed_sample(li, idx, slot)] += wpair;
        }
    }
  });
}

SpMat GradientSampling::build_w(const std::function<Tensor(const Vec&)>& coeff) const {
  const int d = grid_.d;
  const int n = grid_.n;
  const double h = grid_.h();
  double wpair = 1.0;
  for (int k = 0; k < d; ++k) wpair *= h / 2.0;

  std::vector<Eigen::Triplet<double>> tw;
  std::array<std::size_t, 9> sample_of{};  // entry (j,b) -> sample id for this pair
  for_each_index(d, cell_shape(), [&](const MIdx& cell) {
    for (int bits = 0; bits < (1 << d); ++bits) {
      MIdx corner = cell;
      Vec pos{0.0, 0.0, 0.0};
      for (int k = 0; k < d; ++k) {
        corner[k] += (bits >> k) & 1;
        pos[k] = corner[k] * h;
      }
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < d; ++b) {
          if (j == b) {
            sample_of[j * d + b] = diag_sample(cell, b);
            continue;
          }
          int li = (d == 2) ? 0 : third_axis(j, b);
          MIdx idx = corner;
          if (d == 3) idx[mixed_[li].axis] = cell[mixed_[li].axis];
          if (grid_.periodic)
            for (int k = 0; k < d; ++k) idx[k] = wrap(idx[k], n);
          int slot;
          if (d == 2)
            slot = (j == 0) ? 0 : 1;
          else
            slot = (mixed_[li].entries[0][0] == j) ? 0 : 1;
          sample_of[j * d + b] = mixed_sample(li, idx, slot);
        }
      Tensor a = coeff(pos);
      for (int i = 0; i < d; ++i)
        for (int al = 0; al < d; ++al)
          for (int j = 0; j < d; ++j)
            for (int be = 0; be < d; ++be) {
              double v = a(i, j, al, be);
              if (v == 0.0) continue;
              tw.emplace_back(sample_of[i * d + al], sample_of[j * d + be], wpair * v);
            }
    }
  });
  SpMat w(total_, total_);
  w.setFromTriplets(tw.begin(), tw.end());
  return w;
}

Eigen::VectorXd GradientSampling::affine_samples(const double* e) const {
  const int d = grid_.d;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(total_);
  for_each_index(d, cell_shape(), [&](const MIdx& cell) {
    for (int b = 0; b < d; ++b) s[diag_sample(cell, b)] = e[b * d + b];
  });
  for (std::size_t li = 0; li < mixed_.size(); ++li)
    for_each_index(d, mixed_[li].shape, [&](const MIdx& nu) {
      for (int slot = 0; slot < 2; ++slot) {
        int j = mixed_[li].entries[slot][0], b = mixed_[li].entries[slot][1];
        s[mixed_sample(int(li), nu, slot)] = e[j * d + b];
      }
    });
  return s;
}

Eigen::VectorXd GradientSampling::tensor_field_samples(
    const std::function<double(int, int, const Vec&)>& f) const {
  const int d = grid_.d;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(total_);
  for_each_index(d, cell_shape(), [&](const MIdx& cell) {
    for (int b = 0; b < d; ++b) {
      std::size_t id = diag_sample(cell, b);
      s[id] = f(b, b, position_[id]);
    }
  });
  for (std::size_t li = 0; li < mixed_.size(); ++li)
    for_each_index(d, mixed_[li].shape, [&](const MIdx& nu) {
      for (int slot = 0; slot < 2; ++slot) {
        int j = mixed_[li].entries[slot][0], b = mixed_[li].entries[slot][1];
        std::size_t id = mixed_sample(int(li), nu, slot);
        s[id] = f(j, b, position_[id]);
      }
    });
  return s;
}

void GradientSampling::cell_gradient(const Eigen::VectorXd& samples, const MIdx& cell,
                                     double* out) const {
  const int d = grid_.d;
  const int n = grid_.n;
  for (int b = 0; b < d; ++b) out[b * d + b] = samples[diag_sample(cell, b)];
  for (int j = 0; j < d; ++j)
    for (int b = 0; b < d; ++b) {
      if (j == b) continue;
      int li = (d == 2) ? 0 : third_axis(j, b);
      int slot;
      if (d == 2)
        slot = (j == 0) ? 0 : 1;
      else
        slot = (mixed_[li].entries[0][0] == j) ? 0 : 1;
      // Average over the 4 lattice points of this cell (corners in 2D, the
      // cell's edges along the lattice axis in 3D).
      int a1 = j, a2 = b;
      double acc = 0.0;
      for (int bits = 0; bits < 4; ++bits) {
        MIdx idx = cell;
        idx[a1] += bits & 1;
        idx[a2] += (bits >> 1) & 1;
        if (grid_.periodic)
          for (int k = 0; k < d; ++k) idx[k] = wrap(idx[k], n);
        acc += samples[mixed_sample(li, idx, slot)];
      }
      out[j * d + b] = 0.25 * acc;
    }
}

DiscreteOperator::DiscreteOperator(const GridDesc& g, std::function<Tensor(const Vec&)> coeff)
    : sampling_(g) {
  W_ = sampling_.build_w(coeff);
  SpMat gt = SpMat(sampling_.G().transpose());
  K_ = gt * SpMat(W_ * sampling_.G());
}

GridVelocity DiscreteOperator::apply(const GridVelocity& u) const {
  if (!(u.grid() == grid())) throw ValidationError("apply: grid mismatch");
  const Eigen::Map<const Eigen::VectorXd> uv(u.data().data(), u.data().size());
  double hd = 1.0;
  for (int k = 0; k < grid().d; ++k) hd *= grid().h();
  Eigen::VectorXd y = K_ * uv / hd;
  GridVelocity out(grid());
  Eigen::Map<Eigen::VectorXd>(out.data().data(), out.data().size()) = y;
  if (!grid().periodic) {
    const VelocityLayout& lay = out.layout();
    for (int c = 0; c < grid().d; ++c)
      for_each_index(grid().d, lay.shape[c], [&](const MIdx& idx) {
        if (lay.on_boundary(c, idx)) out.at(c, idx) = 0.0;
      });
  }
  return out;
}

double DiscreteOperator::form(const GridVelocity& u, const GridVelocity& v) const {
  const Eigen::Map<const Eigen::VectorXd> uv(u.data().data(), u.data().size());
  const Eigen::Map<const Eigen::VectorXd> vv(v.data().data(), v.data().size());
  return vv.dot(K_ * uv);
}

double DiscreteOperator::grad_norm_sq(const GridVelocity& u) const {
  const Eigen::Map<const Eigen::VectorXd> uv(u.data().data(), u.data().size());
  Eigen::VectorXd s = sampling_.G() * uv;
  double acc = 0.0;
  for (std::size_t k = 0; k < sampling_.sample_count(); ++k)
    acc += sampling_.weights()[k] * s[k] * s[k];
  return acc;
}

Eigen::VectorXd DiscreteOperator::gradient_samples(const GridVelocity& u) const {
  const Eigen::Map<const Eigen::VectorXd> uv(u.data().data(), u.data().size());
  return sampling_.G() * uv;
}

Eigen::VectorXd DiscreteOperator::affine_load(const double* e) const {
  return SpMat(sampling_.G().transpose()) * (W_ * sampling_.affine_samples(e));
}

GridPressure divergence(const GridVelocity& u) {
  const GridDesc& g = u.grid();
  GridPressure out(g);
  const double h = g.h();
  for_each_index(g.d, out.shape(), [&](const MIdx& cell) {
    double s = 0.0;
    for (int b = 0; b < g.d; ++b) {
      MIdx hi = cell;
      hi[b] = g.periodic ? wrap(cell[b] + 1, g.n) : cell[b] + 1;
      s += (u.at(b, hi) - u.at(b, cell)) / h;
    }
    out.at(cell) = s;
  });
  return out;
}

GridVelocity gradient(const GridPressure& p) {
  const GridDesc& g = p.grid();
  GridVelocity out(g);
  const double h = g.h();
  const VelocityLayout& lay = out.layout();
  for (int b = 0; b < g.d; ++b)
    for_each_index(g.d, lay.shape[b], [&](const MIdx& idx) {
      if (lay.on_boundary(b, idx)) return;  // box boundary faces carry data, not gradients
      MIdx hi = idx, lo = idx;
      lo[b] = g.periodic ? wrap(idx[b] - 1, g.n) : idx[b] - 1;
      out.at(b, idx) = (p.at(hi) - p.at(lo)) / h;
    });
  return out;
}

SpMat divergence_matrix(const GridDesc& g) {
  VelocityLayout lay(g);
  MIdx cells{g.n, g.n, g.n};
  std::vector<Eigen::Triplet<double>> t;
  const double h = g.h();
  for_each_index(g.d, cells, [&](const MIdx& cell) {
    std::size_t row = flat_index(g.d, cells, cell);
    for (int b = 0; b < g.d; ++b) {
      MIdx hi = cell;
      hi[b] = g.periodic ? wrap(cell[b] + 1, g.n) : cell[b] + 1;
      t.emplace_back(row, lay.index(b, hi), 1.0 / h);
      t.emplace_back(row, lay.index(b, cell), -1.0 / h);
    }
  });
  SpMat d(g.cell_count(), lay.size());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

GridVelocity apply_operator(const CoefficientField& field, const GridVelocity& u) {
  DiscreteOperator op(u.grid(), [&field](const Vec& x) { return field.evaluate(x); });
  return op.apply(u);
}

GridVelocity apply_operator(const ScaledField& field, const GridVelocity& u) {
  double cells_per_period = field.eps() / u.grid().h();
  if (std::abs(cells_per_period - std::round(cells_per_period)) > 1e-12)
    throw ValidationError("apply_operator: eps must be an integer number of grid cells");
  DiscreteOperator op(u.grid(), [&field](const Vec& x) { return field.evaluate(x); });
  return op.apply(u);
}

double window_average(const GridDesc& g, const std::vector<double>& cell_values,
                      const Vec& center, double r) {
  if (cell_values.size() != g.cell_count())
    throw ValidationError("window_average: cell count mismatch");
  MIdx cells{g.n, g.n, g.n};
  double acc = 0.0;
  std::size_t count = 0;
  for_each_index(g.d, cells, [&](const MIdx& cell) {
    Vec x{0.0, 0.0, 0.0};
    for (int k = 0; k < g.d; ++k) x[k] = (cell[k] + 0.5) * g.h();
    if (dist2(x, center, g.d) <= r * r) {
      acc += cell_values[flat_index(g.d, cells, cell)];
      ++count;
    }
  });
  if (count == 0) throw ValidationError("window_average: empty window");
  return acc / count;
}

double window_average(const GridPressure& field, const Vec& center, double r) {
  return window_average(field.grid(), field.data(), center, r);
}

}  // namespace stokes_homog
