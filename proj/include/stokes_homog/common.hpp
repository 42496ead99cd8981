#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stokes_homog {

// Points and multi-indices are stored with 3 slots; only the first d are used.
using Vec = std::array<double, 3>;
using MIdx = std::array<int, 3>;

inline Vec make_vec(double x, double y, double z = 0.0) { return {x, y, z}; }

inline double frac(double t) {
  double f = t - std::floor(t);
  return f < 1.0 ? f : 0.0;
}

inline Vec frac(const Vec& y) { return {frac(y[0]), frac(y[1]), frac(y[2])}; }

inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

inline double dist2(const Vec& a, const Vec& b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Row-major iteration over {0..shape[0]-1} x ... x {0..shape[d-1]-1}.
template <typename F>
void for_each_index(int d, const MIdx& shape, F&& body) {
  MIdx idx{0, 0, 0};
  while (true) {
    body(static_cast<const MIdx&>(idx));
    int k = d - 1;
    while (k >= 0) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
      --k;
    }
    if (k < 0) return;
  }
}

inline std::size_t flat_index(int d, const MIdx& shape, const MIdx& idx) {
  std::size_t f = 0;
  for (int k = 0; k < d; ++k) f = f * shape[k] + idx[k];
  return f;
}

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a, used for provenance hashes of serialized specs.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace stokes_homog
