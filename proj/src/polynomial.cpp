#include "shotvalue/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "shotvalue/error.hpp"

namespace shotvalue {

namespace {

// Critical points of p (roots of p') strictly inside (lo, hi), ascending.
std::vector<double> critical_points(const Cubic& p, double lo, double hi) {
  const double a = 3.0 * p.c[3], b = 2.0 * p.c[2], c = p.c[1];
  std::vector<double> out;
  const double scale = std::abs(a) + std::abs(b) + std::abs(c);
  if (scale == 0.0) return out;
  if (std::abs(a) <= 1e-14 * scale) {
    if (b != 0.0) out.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      // Numerically stable pair.
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      if (q != 0.0) out.push_back(q / a);
      if (q != 0.0) out.push_back(c / q);
      else out.push_back(0.0);
    }
  }
  std::erase_if(out, [&](double t) { return !(t > lo && t < hi); });
  std::sort(out.begin(), out.end());
  return out;
}

// Root of p on [a, b] where p(a) and p(b) have opposite signs.
double bracketed_root(const Cubic& p, double a, double b) {
  double fa = p(a);
  double x = 0.5 * (a + b);
  for (int iter = 0; iter < 200; ++iter) {
    const double fx = p(x);
    if (fx == 0.0) return x;
    if ((fx < 0) == (fa < 0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
    }
    // Newton step when it stays inside the bracket, bisection otherwise.
    const double d = p.derivative(x);
    double next = d != 0.0 ? x - fx / d : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x) ||
        b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b))) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace

std::vector<double> real_roots_in(const Cubic& p, double lo, double hi) {
  std::vector<double> roots;
  if (!(hi > lo)) return roots;
  const double scale =
      std::abs(p.c[0]) + std::abs(p.c[1]) * std::max(1.0, std::abs(hi)) +
      std::abs(p.c[2]) * std::max(1.0, hi * hi) + std::abs(p.c[3]) * std::max(1.0, std::abs(hi * hi * hi));
  if (scale == 0.0) return roots;
  const double flat = 1e-13 * scale;

  std::vector<double> knots{lo};
  for (double c : critical_points(p, lo, hi)) knots.push_back(c);
  knots.push_back(hi);

  // Sign just to the right of lo, so a root exactly at lo is not reported.
  auto sign_after_lo = [&]() {
    const double v = p(lo);
    if (v != 0.0) return v;
    const double d = p.derivative(lo);
    if (d != 0.0) return d;
    return p.second_derivative(lo);
  };

  double fa = sign_after_lo();
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i], b = knots[i + 1];
    const double fb = p(b);
    if (fb == 0.0) {
      roots.push_back(b);
      const double d = p.derivative(b);
      fa = d != 0.0 ? d : p.second_derivative(b);
      continue;
    }
    if ((fa < 0) != (fb < 0) && fa != 0.0) {
      roots.push_back(bracketed_root(p, a, b));
    } else if (i + 2 < knots.size() && std::abs(fb) <= flat) {
      // Tangential touch at a critical point.
      roots.push_back(b);
    }
    fa = fb;
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

std::optional<double> smallest_root_in(const Cubic& p, double lo, double hi) {
  auto roots = real_roots_in(p, lo, hi);
  if (roots.empty()) return std::nullopt;
  return roots.front();
}

PolynomialFit fit_polynomial(std::span<const double> t, std::span<const double> value,
                             int degree) {
  if (degree != 1 && degree != 3) throw InvalidArgument("degree must be 1 or 3");
  if (t.size() != value.size()) throw InvalidArgument("time and value lengths differ");
  const auto n = static_cast<Eigen::Index>(t.size());
  const int cols = degree + 1;
  if (n < cols) {
    throw InvalidArgument("need at least " + std::to_string(cols) + " samples, got " +
                          std::to_string(n));
  }
  std::vector<double> sorted(t.begin(), t.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw NumericError("duplicate timestamps make the design rank-deficient");
  }

  Eigen::MatrixXd design(n, cols);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double power = 1.0;
    for (int j = 0; j < cols; ++j) {
      design(i, j) = power;
      power *= t[i];
    }
    rhs(i) = value[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) throw NumericError("rank-deficient polynomial design");
  const Eigen::VectorXd coef = qr.solve(rhs);

  PolynomialFit fit;
  for (int j = 0; j < cols; ++j) fit.poly.c[j] = coef(j);
  fit.rmse = std::sqrt((design * coef - rhs).squaredNorm() / static_cast<double>(n));
  fit.samples = t.size();
  return fit;
}

}  // namespace shotvalue
