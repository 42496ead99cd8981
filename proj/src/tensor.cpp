#include "stokes_homog/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numbers>

namespace stokes_homog {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Symmetric part of the d^2 x d^2 quadratic-form matrix M[(i,a),(j,b)] = a_{ij}^{ab}.
Eigen::MatrixXd form_matrix_sym(const Tensor& t) {
  const int d = t.dim();
  Eigen::MatrixXd m(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a)
      for (int j = 0; j < d; ++j)
        for (int b = 0; b < d; ++b) m(i * d + a, j * d + b) = t(i, j, a, b);
  return 0.5 * (m + m.transpose());
}

double scalar_trig(const FamilySpec& spec, const Vec& y) {
  double a = spec.trig_base;
  for (const auto& mode : spec.modes) {
    double phase = mode.phase;
    for (int k = 0; k < spec.d; ++k) phase += kTwoPi * mode.wave[k] * y[k];
    a += mode.amplitude * std::sin(phase);
  }
  return a;
}

double scalar_checkerboard(const FamilySpec& spec, const Vec& y) {
  double parity = 1.0;
  for (int k = 0; k < spec.d; ++k) parity *= std::tanh(std::sin(kTwoPi * y[k]) / spec.cb_width);
  double s = 0.5 * (1.0 + parity);
  return spec.cb_low + (spec.cb_high - spec.cb_low) * s;
}

Tensor scalar_times_identity(int d, double a, const std::optional<Tensor>& constant_part) {
  Tensor t = Tensor::identity(d);
  t *= a;
  if (constant_part) t += *constant_part;
  return t;
}

Tensor table_lookup(const FamilySpec& spec, const Vec& y) {
  const int d = spec.d;
  const int n = spec.table_n;
  // Multilinear interpolation on the periodic lattice y = i/n.
  MIdx lo{0, 0, 0};
  Vec w{0.0, 0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    double t = frac(y[k]) * n;
    lo[k] = static_cast<int>(std::floor(t));
    w[k] = t - lo[k];
  }
  Tensor out(d);
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (int k = 0; k < d; ++k) {
      int bit = (c >> k) & 1;
      weight *= bit ? w[k] : (1.0 - w[k]);
      flat = flat * n + wrap(lo[k] + bit, n);
    }
    if (weight == 0.0) continue;
    const double* src = spec.table.data() + flat * d * d * d * d;
    std::size_t e = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) out(i, j, a, b) += weight * src[e++];
  }
  return out;
}

}  // namespace

std::string FamilySpec::name() const {
  switch (kind) {
    case Kind::kConstant: return "constant";
    case Kind::kTrig: return "trig";
    case Kind::kCheckerboard: return "checkerboard";
    case Kind::kTable: return "table";
  }
  return "unknown";
}

CoefficientField make_coefficient_field(const FamilySpec& spec) {
  const int d = spec.d;
  if (d != 2 && d != 3) throw ValidationError("coefficient field: dimension must be 2 or 3");

  std::function<Tensor(const Vec&)> eval;
  double mu_claimed = 0.0;
  std::optional<HolderMetadata> holder;

  switch (spec.kind) {
    case FamilySpec::Kind::kConstant: {
      Tensor c = spec.constant_part.value_or(Tensor::identity(d));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form_matrix_sym(c));
      mu_claimed = es.eigenvalues().minCoeff();
      eval = [c](const Vec&) { return c; };
      holder = HolderMetadata{1.0, 0.0};
      break;
    }
    case FamilySpec::Kind::kTrig: {
      double amp_sum = 0.0, lip = 0.0;
      for (const auto& m : spec.modes) {
        amp_sum += std::abs(m.amplitude);
        double k2 = 0.0;
        for (int k = 0; k < d; ++k) k2 += double(m.wave[k]) * m.wave[k];
        lip += std::abs(m.amplitude) * kTwoPi * std::sqrt(k2);
      }
      mu_claimed = spec.trig_base - amp_sum;
      if (spec.constant_part) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form_matrix_sym(*spec.constant_part));
        mu_claimed += es.eigenvalues().minCoeff();
      }
      FamilySpec s = spec;
      eval = [s, d](const Vec& y) {
        return scalar_times_identity(d, scalar_trig(s, y), s.constant_part);
      };
      holder = HolderMetadata{1.0, d * lip};
      break;
    }
    case FamilySpec::Kind::kCheckerboard: {
      FamilySpec s = spec;
      eval = [s, d](const Vec& y) {
        return scalar_times_identity(d, scalar_checkerboard(s, y), s.constant_part);
      };
      mu_claimed = 0.0;  // certified by sampling below
      break;
    }
    case FamilySpec::Kind::kTable: {
      if (spec.table_n < 1) throw ValidationError("table field: table_n must be >= 1");
      const std::size_t want =
          static_cast<std::size_t>(std::pow(spec.table_n, d)) * d * d * d * d;
      if (spec.table.size() != want) throw ValidationError("table field: sample count mismatch");
      FamilySpec s = spec;
      eval = [s](const Vec& y) { return table_lookup(s, y); };
      break;
    }
  }

  CoefficientField probe(d, mu_claimed, spec, eval, holder);
  const int res = (d == 2) ? 64 : 16;
  EllipticityReport rep = check_ellipticity(probe, res);
  if (!rep.pass) throw ValidationError("coefficient field is not elliptic on the sample set");
  if (mu_claimed <= 0.0) mu_claimed = rep.mu_lower;
  if (spec.kind == FamilySpec::Kind::kCheckerboard && !holder)
    holder = HolderMetadata{1.0, holder_seminorm_estimate(probe, 1.0, 32)};
  return CoefficientField(d, mu_claimed, spec, std::move(eval), holder);
}

EllipticityReport check_ellipticity(const CoefficientField& field, int sample_resolution) {
  const int d = field.dim();
  const int n = std::max(2, sample_resolution);
  EllipticityReport rep;
  rep.mu_lower = std::numeric_limits<double>::infinity();
  rep.mu_upper = -std::numeric_limits<double>::infinity();
  MIdx shape{n, n, n};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for_each_index(d, shape, [&](const MIdx& idx) {
    Vec y{double(idx[0]) / n, double(idx[1]) / n, double(idx[2]) / n};
    es.compute(form_matrix_sym(field.evaluate(y)), Eigen::EigenvaluesOnly);
    rep.mu_lower = std::min(rep.mu_lower, es.eigenvalues().minCoeff());
    rep.mu_upper = std::max(rep.mu_upper, es.eigenvalues().maxCoeff());
  });
  rep.pass = rep.mu_lower > 0.0;
  return rep;
}

double holder_seminorm_estimate(const CoefficientField& field, double exponent,
                                int sample_resolution) {
  if (!(exponent > 0.0 && exponent <= 1.0))
    throw ValidationError("holder exponent must be in (0,1]");
  const int d = field.dim();
  const int n = std::max(2, sample_resolution);
  std::vector<Vec> pts;
  std::vector<Tensor> vals;
  MIdx shape{n, n, n};
  for_each_index(d, shape, [&](const MIdx& idx) {
    Vec y{double(idx[0]) / n, double(idx[1]) / n, double(idx[2]) / n};
    pts.push_back(y);
    vals.push_back(field.evaluate(y));
  });
  double best = 0.0;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    for (std::size_t q = p + 1; q < pts.size(); ++q) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        double delta = std::abs(pts[p][k] - pts[q][k]);
        delta = std::min(delta, 1.0 - delta);  // periodic min-image
        r2 += delta * delta;
      }
      if (r2 == 0.0) continue;
      double num = vals[p].frobenius_dist(vals[q]);
      best = std::max(best, num / std::pow(std::sqrt(r2), exponent));
    }
  }
  return best;
}

}  // namespace stokes_homog
