#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "stokes_homog/common.hpp"

namespace stokes_homog {

// Dense rank-4 coefficient tensor a_{ij}^{ab} acting on d x d matrices:
// (A m)_i^a = a_{ij}^{ab} m_j^b. Stored row-major over (i, j, a, b).
class Tensor {
 public:
  Tensor() : d_(2) { v_.fill(0.0); }
  explicit Tensor(int d) : d_(d) { v_.fill(0.0); }

  int dim() const { return d_; }

  double& operator()(int i, int j, int a, int b) { return v_[off(i, j, a, b)]; }
  double operator()(int i, int j, int a, int b) const { return v_[off(i, j, a, b)]; }

  static Tensor identity(int d) {
    Tensor t(d);
    for (int i = 0; i < d; ++i)
      for (int a = 0; a < d; ++a) t(i, i, a, a) = 1.0;
    return t;
  }

  // Adjoint tensor a*_{ij}^{ab} = a_{ji}^{ba}.
  Tensor adjoint() const {
    Tensor t(d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        for (int a = 0; a < d_; ++a)
          for (int b = 0; b < d_; ++b) t(i, j, a, b) = (*this)(j, i, b, a);
    return t;
  }

  Tensor& operator+=(const Tensor& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
  }
  Tensor& operator*=(double c) {
    for (double& x : v_) x *= c;
    return *this;
  }

  // Quadratic form xi : A xi for xi in R^{dxd}.
  double form(const double* xi) const {
    double s = 0.0;
    for (int i = 0; i < d_; ++i)
      for (int a = 0; a < d_; ++a)
        for (int j = 0; j < d_; ++j)
          for (int b = 0; b < d_; ++b)
            s += (*this)(i, j, a, b) * xi[i * d_ + a] * xi[j * d_ + b];
    return s;
  }

  double frobenius_dist(const Tensor& o) const {
    double s = 0.0;
    for (std::size_t k = 0; k < v_.size(); ++k) {
      double e = v_[k] - o.v_[k];
      s += e * e;
    }
    return std::sqrt(s);
  }

 private:
  std::size_t off(int i, int j, int a, int b) const {
    return ((static_cast<std::size_t>(i) * d_ + j) * d_ + a) * d_ + b;
  }
  int d_;
  std::array<double, 81> v_;
};

struct HolderMetadata {
  double exponent = 1.0;   // lambda in (0,1]
  double seminorm = 0.0;   // tau >= 0
};

// Specification of a coefficient family; also the serialized form (JSON).
struct FamilySpec {
  enum class Kind { kConstant, kTrig, kCheckerboard, kTable };
  Kind kind = Kind::kConstant;
  int d = 2;

  // constant: full tensor; also added to trig families as a constant part.
  std::optional<Tensor> constant_part;

  struct TrigMode {
    double amplitude = 0.0;
    MIdx wave{0, 0, 0};       // integer wave vector k
    double phase = 0.0;       // a += amplitude * sin(2 pi k.y + phase)
  };
  // trig: a(y) = base + sum_m amp sin(2 pi k.y + phase), tensor a(y)*Id (+ constant_part).
  double trig_base = 1.0;
  std::vector<TrigMode> modes;

  // checkerboard: scalar two-phase field smoothed by w, tensor a(y)*Id.
  double cb_low = 1.0;
  double cb_high = 4.0;
  double cb_width = 0.1;

  // table: grid samples of the full tensor, multilinear periodic interpolation.
  int table_n = 0;
  std::vector<double> table;  // row-major cells x d^4

  std::string name() const;
};

// 1-periodic elliptic coefficient tensor with claimed ellipticity constant.
class CoefficientField {
 public:
  CoefficientField() = default;
  CoefficientField(int d, double mu, FamilySpec spec,
                   std::function<Tensor(const Vec&)> eval,
                   std::optional<HolderMetadata> holder = std::nullopt)
      : d_(d), mu_(mu), spec_(std::move(spec)), eval_(std::move(eval)), holder_(holder) {}

  int dim() const { return d_; }
  double mu() const { return mu_; }
  const FamilySpec& spec() const { return spec_; }
  const std::optional<HolderMetadata>& holder() const { return holder_; }

  Tensor evaluate(const Vec& y) const { return eval_(frac(y)); }

 private:
  int d_ = 2;
  double mu_ = 1.0;
  FamilySpec spec_;
  std::function<Tensor(const Vec&)> eval_;
  std::optional<HolderMetadata> holder_;
};

// A(x/eps) with eps = 1/m in the units of the computational domain.
class ScaledField {
 public:
  ScaledField() = default;
  ScaledField(CoefficientField base, double eps) : base_(std::move(base)), eps_(eps) {
    if (eps <= 0.0) throw ValidationError("ScaledField: eps must be positive");
  }

  int dim() const { return base_.dim(); }
  double eps() const { return eps_; }
  const CoefficientField& base() const { return base_; }

  Tensor evaluate(const Vec& x) const {
    return base_.evaluate({x[0] / eps_, x[1] / eps_, x[2] / eps_});
  }

 private:
  CoefficientField base_;
  double eps_ = 1.0;
};

struct EllipticityReport {
  double mu_lower = 0.0;
  double mu_upper = 0.0;
  bool pass = false;
};

CoefficientField make_coefficient_field(const FamilySpec& spec);

EllipticityReport check_ellipticity(const CoefficientField& field, int sample_resolution);

double holder_seminorm_estimate(const CoefficientField& field, double exponent,
                                int sample_resolution);

}  // namespace stokes_homog
