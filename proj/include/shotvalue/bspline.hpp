#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace shotvalue {

// Clamped cubic B-spline basis on [knots.front(), knots.back()]. Inputs
// outside the boundary knots are clamped onto them.
class BSplineBasis {
 public:
  BSplineBasis() = default;
  // Boundary knots repeated degree + 1 times around strictly increasing
  // interior knots.
  BSplineBasis(double lo, double hi, std::vector<double> interior, int degree = 3);

  // Interior knots at the empirical quantiles j / (interior + 1) of x; ties
  // collapse, so heavily discrete data yields fewer knots.
  static BSplineBasis from_quantiles(std::span<const double> x, int interior, int degree = 3);

  int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  int degree() const { return degree_; }
  double lower() const { return knots_.front(); }
  double upper() const { return knots_.back(); }
  std::vector<double> interior() const;
  const std::vector<double>& knots() const { return knots_; }

  // Writes size() values that sum to one.
  void evaluate(double x, double* out) const;
  Eigen::VectorXd evaluate(double x) const;

 private:
  int degree_ = 3;
  std::vector<double> knots_;
};

}  // namespace shotvalue
