#include "shotvalue/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "shotvalue/error.hpp"

namespace shotvalue {

BSplineBasis::BSplineBasis(double lo, double hi, std::vector<double> interior, int degree) : degree_(degree) {
  if (degree < 1) throw InvalidArgument("spline degree must be at least 1");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("spline range must be finite and non-empty");
  }
  for (std::size_t i = 0; i < interior.size(); ++i) {
    if (!(interior[i] > lo && interior[i] < hi) || (i > 0 && !(interior[i] > interior[i - 1]))) {
      throw InvalidArgument("interior knots must be strictly increasing inside the range");
    }
  }
  knots_.assign(degree + 1, lo);
  knots_.insert(knots_.end(), interior.begin(), interior.end());
  knots_.insert(knots_.end(), degree + 1, hi);
}

BSplineBasis BSplineBasis::from_quantiles(std::span<const double> x, int interior, int degree) {
  if (x.empty()) throw InvalidArgument("no data for spline knots");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  double lo = sorted.front(), hi = sorted.back();
  if (!(hi > lo)) {
    // Constant input: a unit-wide range keeps the basis well defined.
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> knots;
  const auto n = sorted.size();
  for (int j = 1; j <= interior; ++j) {
    const double pos = static_cast<double>(j) / (interior + 1) * static_cast<double>(n - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    const double q = i + 1 < n ? sorted[i] + frac * (sorted[i + 1] - sorted[i]) : sorted[i];
    if (q > lo && q < hi && (knots.empty() || q > knots.back())) knots.push_back(q);
  }
  return BSplineBasis(lo, hi, std::move(knots), degree);
}

std::vector<double> BSplineBasis::interior() const {
  return {knots_.begin() + degree_ + 1, knots_.end() - degree_ - 1};
}

void BSplineBasis::evaluate(double x, double* out) const {
  const int n = size();
  std::fill(out, out + n, 0.0);
  x = std::clamp(x, lower(), upper());
  // Knot span: knots[s] <= x < knots[s + 1], with the right end folded into
  // the last non-empty span.
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  int s = static_cast<int>(it - knots_.begin()) - 1;
  s = std::min(s, n - 1);
  // de Boor's triangular recursion for the degree + 1 nonzero functions.
  std::vector<double> b(degree_ + 1, 0.0), left(degree_ + 1), right(degree_ + 1);
  b[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    left[j] = x - knots_[s + 1 - j];
    right[j] = knots_[s + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? b[r] / denom : 0.0;
      b[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    b[j] = saved;
  }
  for (int r = 0; r <= degree_; ++r) out[s - degree_ + r] = b[r];
}

Eigen::VectorXd BSplineBasis::evaluate(double x) const {
  Eigen::VectorXd v(size());
  evaluate(x, v.data());
  return v;
}

}  // namespace shotvalue
