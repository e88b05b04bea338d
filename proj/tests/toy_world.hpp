#pragma once

// A two-variable world: coordinate 0 is observed, the outcome depends only on
// coordinate 1. Used for Monte Carlo versus quadrature checks.

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shotvalue/conditioning.hpp"
#include "shotvalue/dpgmm.hpp"
#include "shotvalue/esv.hpp"

namespace toy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct World {
  shotvalue::MixtureModel mixture;
  double observed = 0.0;
  double noise = 0.0;
  bool smooth = false;
  // Piecewise rule: p_low below c1, p_mid on [c1, c2), error from c2 on.
  double c1 = 0.0, c2 = 0.0, p_low = 0.0, p_mid = 0.0;
  // Smooth rule: logistic(slope * b + offset).
  double slope = 0.0, offset = 0.0;
};

inline World random_world(std::mt19937_64& gen, bool smooth) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<shotvalue::MixtureComponent> comps;
  const double w0 = 0.2 + 0.6 * u(gen);
  for (double w : {w0, 1.0 - w0}) {
    shotvalue::MixtureComponent c;
    c.weight = w;
    c.mean = VectorXd(2);
    c.mean << 2.0 * n(gen), 2.0 * n(gen);
    c.covariance = oracle::random_spd(2, gen);
    comps.push_back(std::move(c));
  }
  World world;
  world.mixture = shotvalue::MixtureModel(std::move(comps));
  world.observed = world.mixture.mean()(0) + n(gen);
  world.noise = u(gen) < 0.5 ? 0.0 : 0.5 * u(gen);
  world.smooth = smooth;
  world.c1 = -1.0 + 2.0 * u(gen);
  world.c2 = world.c1 + 0.5 + 2.0 * u(gen);
  world.p_low = u(gen);
  world.p_mid = u(gen);
  world.slope = 2.0 * n(gen);
  world.offset = n(gen);
  return world;
}

inline shotvalue::FutureValue rule(const World& w, double b) {
  if (w.smooth) return {1.0 / (1.0 + std::exp(-(w.slope * b + w.offset))), false};
  if (b >= w.c2) return {0.0, true};
  return {b < w.c1 ? w.p_low : w.p_mid, false};
}

inline shotvalue::Valuer valuer(const World& w) {
  return [&w](const VectorXd& future) { return rule(w, future(1)); };
}

inline shotvalue::ObservationSet observations(const World& w) {
  shotvalue::ObservationSet obs(2);
  obs.add_unit(0, w.observed, w.noise);
  return obs;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Expected value computed from the closed-form conditional of each component.
// Smooth rules are integrated by 64-point Gauss-Hermite quadrature; the
// piecewise-constant rule by exact normal interval probabilities.
inline double expected_value(const World& w) {
  std::vector<double> weight, mean, sd;
  double total = 0.0;
  for (const auto& c : w.mixture.components()) {
    const double saa = c.covariance(0, 0) + w.noise;
    const double sba = c.covariance(1, 0);
    const double r = w.observed - c.mean(0);
    const double lik = std::exp(-0.5 * r * r / saa) / std::sqrt(2 * M_PI * saa);
    weight.push_back(c.weight * lik);
    total += c.weight * lik;
    mean.push_back(c.mean(1) + sba / saa * r);
    sd.push_back(std::sqrt(c.covariance(1, 1) - sba * sba / saa));
  }
  static const auto gh = oracle::gauss_hermite(64);
  double value = 0.0;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    double e = 0.0;
    if (w.smooth) {
      for (int j = 0; j < gh.first.size(); ++j) {
        e += gh.second(j) * rule(w, mean[k] + std::sqrt(2.0) * sd[k] * gh.first(j)).value;
      }
      e /= std::sqrt(M_PI);
    } else {
      const double f1 = normal_cdf((w.c1 - mean[k]) / sd[k]);
      const double f2 = normal_cdf((w.c2 - mean[k]) / sd[k]);
      e = w.p_low * f1 + w.p_mid * (f2 - f1);
    }
    value += weight[k] / total * e;
  }
  return value;
}

}  // namespace toy
