#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace shotvalue {

// c[0] + c[1] t + c[2] t^2 + c[3] t^3. Lower-degree polynomials leave the
// high coefficients at zero.
struct Cubic {
  std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};

  double operator()(double t) const { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); }
  double derivative(double t) const { return c[1] + t * (2.0 * c[2] + t * 3.0 * c[3]); }
  double second_derivative(double t) const { return 2.0 * c[2] + 6.0 * c[3] * t; }
  Cubic shifted(double offset) const { Cubic p = *this; p.c[0] -= offset; return p; }
};

// Earliest real root of p in (lo, hi]. A root at lo itself is excluded.
// Tangential roots count when |p| vanishes to rounding at a critical point.
std::optional<double> smallest_root_in(const Cubic& p, double lo, double hi);

// Real roots of p on (lo, hi], ascending.
std::vector<double> real_roots_in(const Cubic& p, double lo, double hi);

struct PolynomialFit {
  Cubic poly;
  double rmse = 0.0;
  std::size_t samples = 0;
};

// Least-squares polynomial of degree 1 or 3 through (t, value) pairs.
// Throws InvalidArgument for too few samples and NumericError for duplicate
// timestamps (rank-deficient design).
PolynomialFit fit_polynomial(std::span<const double> t, std::span<const double> value,
                             int degree);

}  // namespace shotvalue
