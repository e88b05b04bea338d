#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "shotvalue/conditioning.hpp"
#include "shotvalue/error.hpp"

using namespace shotvalue;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MixtureModel random_mixture(int k, int d, std::mt19937_64& gen, double spread = 3.0) {
  std::normal_distribution<double> nd;
  std::vector<MixtureComponent> comps;
  for (int j = 0; j < k; ++j) {
    VectorXd m(d);
    for (int i = 0; i < d; ++i) m(i) = spread * nd(gen);
    comps.push_back({1.0 / k, m, oracle::random_spd(d, gen)});
  }
  return MixtureModel(comps);
}

}  // namespace

TEST_CASE("bivariate closed form") {
  for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.95}) {
    MatrixXd s(2, 2);
    s << 1, rho, rho, 1;
    const double a = 1.7;
    const auto g = condition_gaussian(VectorXd::Zero(2), s, (MatrixXd(1, 2) << 1, 0).finished(),
                                      VectorXd::Constant(1, a), VectorXd::Zero(1));
    CHECK(std::abs(g.mean(1) - rho * a) < 1e-12);
    CHECK(std::abs(g.covariance(1, 1) - (1 - rho * rho)) < 1e-12);
    CHECK(std::abs(g.mean(0) - a) < 1e-12);
    CHECK(std::abs(g.covariance(0, 0)) < 1e-12);
  }
}

TEST_CASE("full observation pins the mean") {
  std::mt19937_64 gen(3);
  const MatrixXd s = oracle::random_spd(4, gen);
  const VectorXd x = VectorXd::LinSpaced(4, -1, 2);
  const auto g = condition_gaussian(VectorXd::Zero(4), s, MatrixXd::Identity(4, 4), x, VectorXd::Zero(4));
  CHECK((g.mean - x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.covariance.cwiseAbs().maxCoeff() < 1e-12);

  MixtureModel model({{1.0, VectorXd::Zero(4), s}});
  ObservationSet obs(4);
  for (int i = 0; i < 4; ++i) obs.add_unit(i, x(i));
  const auto cm = condition_mixture(model, obs);
  const MatrixXd draws = sample_futures(cm, 20, 5);
  for (Eigen::Index i = 0; i < draws.rows(); ++i) CHECK(draws.row(i) == cm.components[0].mean.transpose());
}

TEST_CASE("precision-partition oracle on random problems") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd s = oracle::random_spd(6, gen);
    VectorXd mu(6), x(2);
    MatrixXd c(2, 6);
    for (int i = 0; i < 6; ++i) mu(i) = nd(gen);
    for (int i = 0; i < 12; ++i) c.data()[i] = nd(gen);
    for (int i = 0; i < 2; ++i) x(i) = nd(gen);
    const auto g = condition_gaussian(mu, s, c, x, VectorXd::Zero(2));
    const auto [m2, s2] = oracle::precision_partition(mu, s, c, x);
    CHECK((g.mean - m2).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((g.covariance - s2).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g.covariance);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
    CHECK(g.covariance == g.covariance.transpose());
  }
}

TEST_CASE("redundant zero-noise constraints are rejected") {
  MatrixXd c(2, 3);
  c << 1, 0, 0, 2, 0, 0;
  CHECK_THROWS_AS(condition_gaussian(VectorXd::Zero(3), MatrixXd::Identity(3, 3), c, VectorXd::Zero(2),
                                     VectorXd::Zero(2)),
                  NumericError);
  CHECK_NOTHROW(condition_gaussian(VectorXd::Zero(3), MatrixXd::Identity(3, 3), c, VectorXd::Zero(2),
                                   VectorXd::Constant(2, 1e-4)));
}

TEST_CASE("marginal coherence") {
  std::mt19937_64 gen(8);
  const MatrixXd s = oracle::random_spd(5, gen);
  const VectorXd mu = VectorXd::LinSpaced(5, 0, 1);
  MatrixXd c(2, 5);
  c << 1, 0, 0, 0, 0, 0, 1, 0, 0, 0;
  const VectorXd x = (VectorXd(2) << 0.3, -0.4).finished();
  const auto joint = condition_gaussian(mu, s, c, x, VectorXd::Zero(2));
  // Marginalize first, then condition the marginal of coordinates {0,1,3,4}.
  std::vector<int> keep{0, 1, 3, 4};
  VectorXd mk(4);
  MatrixXd sk(4, 4);
  for (int i = 0; i < 4; ++i) {
    mk(i) = mu(keep[i]);
    for (int j = 0; j < 4; ++j) sk(i, j) = s(keep[i], keep[j]);
  }
  MatrixXd ck = MatrixXd::Zero(2, 4);
  ck(0, 0) = ck(1, 1) = 1;
  const auto marg = condition_gaussian(mk, sk, ck, x, VectorXd::Zero(2));
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(marg.mean(i) - joint.mean(keep[i])) < 1e-9);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(marg.covariance(i, j) - joint.covariance(keep[i], keep[j])) < 1e-9);
  }
}

TEST_CASE("weight update") {
  MixtureModel two({{0.5, VectorXd::Zero(1), MatrixXd::Identity(1, 1)},
                    {0.5, VectorXd::Constant(1, 10.0), MatrixXd::Identity(1, 1)}});
  ObservationSet none(1);
  CHECK(update_weights(two, none) == two.weights());
  ObservationSet at0(1);
  at0.add_unit(0, 0.0);
  const VectorXd w = update_weights(two, at0);
  CHECK(w(0) == doctest::Approx(1.0 / (1.0 + std::exp(-50.0))).epsilon(1e-15));
  CHECK(w(1) == doctest::Approx(std::exp(-50.0) / (1.0 + std::exp(-50.0))).epsilon(1e-10));

  // Same projected mean and covariance in both components: unchanged.
  MatrixXd s1(2, 2), s2(2, 2);
  s1 << 1, 0.2, 0.2, 3;
  s2 << 1, -0.5, -0.5, 2;
  MixtureModel same({{0.3, (VectorXd(2) << 1, 5).finished(), s1}, {0.7, (VectorXd(2) << 1, -5).finished(), s2}});
  ObservationSet first(2);
  first.add_unit(0, 2.5, 0.1);
  const VectorXd ws = update_weights(same, first);
  CHECK(ws(0) == doctest::Approx(0.3).epsilon(1e-14));

  // Brute-force numeric integration over the observation noise.
  ObservationSet noisy(1);
  noisy.add_unit(0, 1.3, 0.25);
  const VectorXd wn = update_weights(two, noisy);
  double mass[2] = {0, 0};
  const int steps = 200000;
  const double lo = -15, hi = 25, h = (hi - lo) / steps;
  for (int i = 0; i <= steps; ++i) {
    const double a = lo + i * h;
    const double wgt = (i == 0 || i == steps) ? 0.5 : 1.0;
    const double lik = std::exp(-0.5 * (1.3 - a) * (1.3 - a) / 0.25) / std::sqrt(2 * M_PI * 0.25);
    mass[0] += wgt * h * lik * std::exp(-0.5 * a * a) / std::sqrt(2 * M_PI);
    mass[1] += wgt * h * lik * std::exp(-0.5 * (a - 10) * (a - 10)) / std::sqrt(2 * M_PI);
  }
  CHECK(std::abs(wn(0) - mass[0] / (mass[0] + mass[1])) < 1e-8);
  CHECK(std::abs(wn(1) - mass[1] / (mass[0] + mass[1])) < 1e-8);

  ObservationSet far(1);
  far.add_unit(0, 1e200);
  CHECK_THROWS_AS(update_weights(two, far), NumericError);
}

TEST_CASE("weight update against direct density ratio") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> nd;
  for (int d : {1, 3}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto model = random_mixture(3, d, gen, 1.0);
      ObservationSet obs(d);
      MatrixXd c(1, d);
      for (int i = 0; i < d; ++i) c(0, i) = nd(gen);
      obs.add({c.row(0).transpose(), nd(gen), 0.05});
      const VectorXd w = update_weights(model, obs);
      VectorXd direct(3);
      for (int k = 0; k < 3; ++k) {
        const auto& comp = model.component(k);
        MatrixXd g = c * comp.covariance * c.transpose();
        g(0, 0) += 0.05;
        direct(k) = comp.weight * oracle::mvn_density(obs.values(), c * comp.mean, g);
      }
      direct /= direct.sum();
      CHECK((w - direct).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("conditioning on a draw concentrates the weight") {
  std::mt19937_64 gen(5);
  const auto model = random_mixture(4, 6, gen, 6.0);
  const MatrixXd draws = sample(model, 1, 31);
  ObservationSet obs(6);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 10; ++i) {
    VectorXd row(6);
    for (int j = 0; j < 6; ++j) row(j) = nd(gen);
    obs.add({row, row.dot(draws.row(0).transpose()), 1e-4});
  }
  const VectorXd post = update_weights(model, obs);
  // The component that generated the draw is the one with the largest
  // responsibility under the unconditioned model.
  VectorXd resp(4);
  for (int k = 0; k < 4; ++k) {
    resp(k) = model.component(k).weight *
              oracle::mvn_density(draws.row(0).transpose(), model.component(k).mean, model.component(k).covariance);
  }
  Eigen::Index src;
  resp.maxCoeff(&src);
  CHECK(post(src) > 0.99);
}

TEST_CASE("stacked duplicates equal sequential conditioning") {
  std::mt19937_64 gen(12);
  const auto model = random_mixture(3, 4, gen, 1.0);
  ObservationSet once(4), stacked(4);
  const VectorXd row = (VectorXd(4) << 1, 0.5, -0.2, 0).finished();
  once.add({row, 0.7, 0.3});
  stacked.add({row, 0.7, 0.3});
  stacked.add({row, 0.7, 0.3});
  const auto first = condition_mixture(model, once);
  std::vector<MixtureComponent> comps;
  for (const auto& c : first.components) comps.push_back({c.weight, c.mean, c.covariance});
  const auto second = condition_mixture(MixtureModel(comps), once);
  const auto both = condition_mixture(model, stacked);
  REQUIRE(second.components.size() == both.components.size());
  for (std::size_t k = 0; k < both.components.size(); ++k) {
    CHECK(std::abs(second.components[k].weight - both.components[k].weight) < 1e-9);
    CHECK((second.components[k].mean - both.components[k].mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((second.components[k].covariance - both.components[k].covariance).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("single component mixture reduces to condition_gaussian") {
  std::mt19937_64 gen(1);
  const MatrixXd s = oracle::random_spd(3, gen);
  const VectorXd mu = VectorXd::Ones(3);
  MixtureModel model({{1.0, mu, s}});
  ObservationSet obs(3);
  obs.add({(VectorXd(3) << 1, 1, 0).finished(), 0.5, 0.01});
  const auto cm = condition_mixture(model, obs);
  const auto g = condition_gaussian(mu, s, obs.matrix(), obs.values(), obs.noise());
  REQUIRE(cm.components.size() == 1);
  CHECK(cm.components[0].weight == 1.0);
  CHECK(cm.components[0].mean == g.mean);
  CHECK(cm.components[0].covariance == g.covariance);
  CHECK(cm.constraint_count == 1);
}

TEST_CASE("sampled futures") {
  std::mt19937_64 gen(21);
  const MatrixXd s = oracle::random_spd(5, gen);
  const VectorXd mu = VectorXd::LinSpaced(5, -2, 2);
  MixtureModel model({{1.0, mu, s}});
  ObservationSet obs(5);
  obs.add({(VectorXd(5) << 1, 0.2, 0.04, 0.008, 0).finished(), 1.5, 0.0});
  obs.add_unit(4, -0.5);
  const auto cm = condition_mixture(model, obs);
  const int n = 100000;
  const MatrixXd f = sample_futures(cm, n, 8);
  CHECK(f == sample_futures(cm, n, 8));
  CHECK(f.topRows(10) == sample_futures(cm, 10, 8));
  for (const auto& c : obs.constraints()) {
    CHECK(((f * c.row).array() - c.value).abs().maxCoeff() < 1e-6);
  }
  const VectorXd mean = f.colwise().mean().transpose();
  const MatrixXd centered = f.rowwise() - mean.transpose();
  for (int j = 0; j < 5; ++j) {
    const double se = std::sqrt(centered.col(j).squaredNorm() / (n - 1.0) / n);
    CHECK(std::abs(mean(j) - cm.components[0].mean(j)) <= 4 * se + 1e-12);
  }
}

TEST_CASE("observation rows") {
  const auto& layout = EncodingLayout::for_flag(BounceFlag::one_bounce);
  auto obs = constraints_from_observations({{ObservationKind::ball, 0.0, 0, 3.0, 0.0}}, layout);
  CHECK(obs.matrix().row(0).sum() == 1.0);
  CHECK(obs.matrix()(0, layout.ball(0, Axis::x, 0)) == 1.0);
  CHECK(obs.values()(0) == 3.0);

  obs = constraints_from_observations({{ObservationKind::ball, 0.2, 0, 1.0, 0.0}}, layout);
  CHECK(obs.matrix()(0, layout.ball(0, Axis::x, 1)) == 0.2);
  CHECK(obs.matrix()(0, layout.ball(0, Axis::x, 2)) == doctest::Approx(0.04));
  CHECK(obs.matrix()(0, layout.ball(0, Axis::x, 3)) == doctest::Approx(0.008));

  obs = constraints_from_observations({{ObservationKind::ball, 0.9, 2, 0.4, 0.0}}, layout, 0.5);
  CHECK(obs.matrix()(0, layout.ball(1, Axis::z, 1)) == doctest::Approx(0.4));
  CHECK(obs.matrix().row(0).segment(0, 12).isZero());

  obs = constraints_from_observations({{ObservationKind::receiver, 0.5, 1, 9.0, 0.0}}, layout);
  CHECK(obs.matrix()(0, layout.receiver(Axis::y, 0)) == 1.0);
  CHECK(obs.matrix()(0, layout.receiver(Axis::y, 1)) == 0.5);

  const auto& flat = EncodingLayout::for_flag(BounceFlag::no_bounce);
  CHECK_THROWS_AS(constraints_from_observations({{ObservationKind::ball, 0.9, 2, 0.4, 0.0}}, flat, 0.5),
                  InvalidArgument);
  CHECK_THROWS_AS(constraints_from_observations({{ObservationKind::ball, 2.0, 0, 0.0, 0.0}}, layout,
                                                std::nullopt, 1.5),
                  InvalidArgument);
  CHECK_THROWS_AS(constraints_from_observations({{ObservationKind::shooter, 0.1, 2, 0.0, 0.0}}, layout),
                  InvalidArgument);
}

TEST_CASE("conditioning on an arc grid reproduces least squares") {
  const auto& layout = EncodingLayout::for_flag(BounceFlag::no_bounce);
  std::mt19937_64 gen(2);
  const MatrixXd s = oracle::random_spd(layout.dim(), gen);
  MixtureModel model({{1.0, VectorXd::Zero(layout.dim()), s}});
  std::vector<Observation> obs;
  std::vector<double> ts{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::normal_distribution<double> nd(0, 0.05);
  MatrixXd design(ts.size(), 4);
  VectorXd vals(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    vals(i) = 1 + 20 * ts[i] - 4.9 * ts[i] * ts[i] + nd(gen);
    for (int k = 0; k < 4; ++k) design(i, k) = std::pow(ts[i], k);
    obs.push_back({ObservationKind::ball, ts[i], 1, vals(i), 1e-12});
  }
  const auto set = constraints_from_observations(obs, layout);
  const auto cm = condition_mixture(model, set);
  const VectorXd ls = design.colPivHouseholderQr().solve(vals);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(cm.components[0].mean(layout.ball(0, Axis::y, k)) - ls(k)) < 1e-6);
}

TEST_CASE("observation CSV round trip") {
  const auto& layout = EncodingLayout::for_flag(BounceFlag::one_bounce);
  std::vector<Observation> obs{{ObservationKind::ball, 0.25, 2, 1.125, 1e-4},
                               {ObservationKind::shooter, 0.0, 0, -0.3, 0.0},
                               {ObservationKind::feature, 0.0, layout.duration(), 0.6, 0.0}};
  std::stringstream ss;
  write_observations_csv(ss, obs, layout);
  const auto back = read_observations_csv(ss, layout);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].kind == obs[i].kind);
    CHECK(back[i].dim == obs[i].dim);
    CHECK(back[i].value == obs[i].value);
    CHECK(back[i].noise_var == obs[i].noise_var);
  }
  std::istringstream defaulted("kind,t,dim,value,noise_var\nball,0.1,x,2,\n");
  CHECK(read_observations_csv(defaulted, layout)[0].noise_var == kDefaultObservationNoise);
  std::istringstream bad("kind,t,dim,value,noise_var\nball,0.1,w,2,\n");
  CHECK_THROWS_AS(read_observations_csv(bad, layout), ParseError);
}
