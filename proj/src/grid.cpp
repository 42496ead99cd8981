#include "stokes_homog/grid.hpp"

namespace stokes_homog {

double mean(const GridPressure& p) {
  double s = 0.0;
  for (double v : p.data()) s += v;
  return s / p.data().size();
}

void subtract_mean(GridPressure& p) {
  double m = mean(p);
  for (double& v : p.data()) v -= m;
}

std::array<double, 3> component_means(const GridVelocity& u) {
  std::array<double, 3> m{0.0, 0.0, 0.0};
  const auto& lay = u.layout();
  for (int c = 0; c < u.grid().d; ++c) {
    std::size_t lo = lay.offset[c], hi = lay.offset[c + 1];
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += u.data()[k];
    m[c] = s / (hi - lo);
  }
  return m;
}

void subtract_component_means(GridVelocity& u) {
  auto m = component_means(u);
  const auto& lay = u.layout();
  for (int c = 0; c < u.grid().d; ++c)
    for (std::size_t k = lay.offset[c]; k < lay.offset[c + 1]; ++k) u.data()[k] -= m[c];
}

namespace {
double weighted_l2(const std::vector<double>& v, double w) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s * w);
}
double cell_volume(const GridDesc& g) {
  double w = 1.0;
  for (int k = 0; k < g.d; ++k) w *= g.h();
  return w;
}
}  // namespace

double l2_norm(const GridVelocity& u) { return weighted_l2(u.data(), cell_volume(u.grid())); }
double l2_norm(const GridPressure& p) { return weighted_l2(p.data(), cell_volume(p.grid())); }

double l2_dist(const GridVelocity& a, const GridVelocity& b) {
  if (!(a.grid() == b.grid())) throw ValidationError("l2_dist: grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    double e = a.data()[k] - b.data()[k];
    s += e * e;
  }
  return std::sqrt(s * cell_volume(a.grid()));
}

double interpolate_component(const GridVelocity& u, int comp, const Vec& x) {
  const GridDesc& g = u.grid();
  if (!g.periodic) throw ValidationError("interpolate_component: periodic grids only");
  const int d = g.d;
  const double h = g.h();
  MIdx lo{0, 0, 0};
  Vec w{0.0, 0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    double shift = (k == comp) ? 0.0 : 0.5;
    double t = x[k] / h - shift;
    double f = std::floor(t);
    lo[k] = static_cast<int>(f);
    w[k] = t - f;
  }
  double out = 0.0;
  for (int c = 0; c < (1 << d); ++c) {
    double weight = 1.0;
    MIdx idx{0, 0, 0};
    for (int k = 0; k < d; ++k) {
      int bit = (c >> k) & 1;
      weight *= bit ? w[k] : (1.0 - w[k]);
      idx[k] = wrap(lo[k] + bit, g.n);
    }
    if (weight != 0.0) out += weight * u.at(comp, idx);
  }
  return out;
}

double interpolate_pressure(const GridPressure& p, const Vec& x) {
  const GridDesc& g = p.grid();
  if (!g.periodic) throw ValidationError("interpolate_pressure: periodic grids only");
  const int d = g.d;
  const double h = g.h();
  MIdx lo{0, 0, 0};
  Vec w{0.0, 0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    double t = x[k] / h - 0.5;
    double f = std::floor(t);
    lo[k] = static_cast<int>(f);
    w[k] = t - f;
  }
  double out = 0.0;
  for (int c = 0; c < (1 << d); ++c) {
    double weight = 1.0;
    MIdx idx{0, 0, 0};
    for (int k = 0; k < d; ++k) {
      int bit = (c >> k) & 1;
      weight *= bit ? w[k] : (1.0 - w[k]);
      idx[k] = wrap(lo[k] + bit, g.n);
    }
    if (weight != 0.0) out += weight * p.at(idx);
  }
  return out;
}

}  // namespace stokes_homog
