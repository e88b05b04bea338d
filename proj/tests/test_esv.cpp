#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "shotvalue/error.hpp"
#include "shotvalue/esv.hpp"
#include "shotvalue/rng.hpp"
#include "shotvalue/synth.hpp"
#include "toy_world.hpp"

using namespace shotvalue;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MixtureModel single(const VectorXd& mean, const MatrixXd& cov) {
  return MixtureModel({MixtureComponent{1.0, mean, cov}});
}

int feature_index(const std::string& name) {
  const auto& names = outcome_feature_names();
  return static_cast<int>(std::find(names.begin(), names.end(), name) - names.begin());
}

// Linear model over named features.
OutcomeModel linear_model(double intercept, const std::vector<std::pair<std::string, double>>& slopes) {
  std::vector<Term> terms;
  VectorXd coef(slopes.size() + 1);
  coef(0) = intercept;
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    Term t;
    t.kind = TermKind::linear;
    t.features = {feature_index(slopes[i].first)};
    terms.push_back(t);
    coef(i + 1) = slopes[i].second;
  }
  return OutcomeModel(outcome_feature_names(), terms, coef, {1.0, 1.0});
}

// Encodings of one-bounce rally shots from the synthetic world.
struct Corpus {
  std::vector<FunctionalEncoding> encodings;
  VectorXd mean;
  MatrixXd cov;
};

const Corpus& rally_corpus() {
  static const Corpus c = [] {
    Corpus out;
    for (const auto& s : generate_corpus(SynthConfig{}, 600, 17)) {
      if (s.record.shot_type != ShotType::rally || s.record.bounce_flag != BounceFlag::one_bounce) continue;
      if (s.truth.error) continue;
      out.encodings.push_back(encode(canonicalize(s.record)).encoding);
    }
    const int d = out.encodings.front().layout().dim();
    MatrixXd x(out.encodings.size(), d);
    for (std::size_t i = 0; i < out.encodings.size(); ++i) x.row(i) = out.encodings[i].values.transpose();
    out.mean = x.colwise().mean().transpose();
    MatrixXd centered = x.rowwise() - out.mean.transpose();
    out.cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    out.cov.diagonal().array() += 1e-6;
    return out;
  }();
  return c;
}

ShotContext rally_context() {
  ShotContext c;
  c.shot_type = ShotType::rally;
  c.flag = BounceFlag::one_bounce;
  return c;
}

}  // namespace

TEST_CASE("summaries") {
  std::vector<FutureValue> v(10, FutureValue{0.7, false});
  auto e = summarize(v);
  CHECK(e.mean == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(e.se == 0.0);
  CHECK(e.n == 10);
  v[0] = {0.9, true};
  e = summarize(v);
  CHECK(e.mean == doctest::Approx(0.63));
  CHECK(e.error_fraction == doctest::Approx(0.1));
  // Sample sd / sqrt(n).
  std::vector<FutureValue> two{{0.2, false}, {0.6, false}};
  CHECK(summarize(two).se == doctest::Approx(0.2));
  CHECK_THROWS_AS(summarize(std::vector<FutureValue>{}), InvalidArgument);
  CHECK_THROWS_AS(summarize(std::vector<FutureValue>{{1.5, false}}), NumericError);
}

TEST_CASE("more weight on error futures lowers the estimate") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<FutureValue> v(200);
  for (auto& f : v) f = u(gen) < 0.3 ? FutureValue{0.0, true} : FutureValue{u(gen), false};
  double prev = 2.0;
  for (double w = 0.5; w <= 8.0; w *= 2) {
    std::vector<double> weights(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) weights[i] = v[i].error ? w : 1.0;
    const double m = summarize(v, weights).mean;
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("constant integrand") {
  VectorXd mean(2);
  mean << 0.0, 1.0;
  auto mix = MixtureModel({MixtureComponent{0.4, mean, MatrixXd::Identity(2, 2)},
                           MixtureComponent{0.6, -mean, 2 * MatrixXd::Identity(2, 2)}});
  ObservationSet obs(2);
  obs.add_unit(0, 0.3, 0.1);
  McConfig mc;
  mc.n_samples = 500;
  auto e = esv_at(obs, mix, [](const VectorXd&) { return FutureValue{0.7, false}; }, mc);
  CHECK(e.mean == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(e.se == 0.0);
  CHECK(e.error_fraction == 0.0);
}

TEST_CASE("fully observed state has a degenerate posterior") {
  VectorXd mean(2);
  mean << 1.0, -1.0;
  MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 2.0;
  auto mix = single(mean, cov);
  ObservationSet obs(2);
  obs.add_unit(0, 0.4);
  obs.add_unit(1, 0.2);
  auto valuer = [](const VectorXd& f) { return FutureValue{1.0 / (1.0 + std::exp(-(f(0) + f(1)))), false}; };
  McConfig mc;
  mc.n_samples = 200;
  auto e = esv_at(obs, mix, valuer, mc);
  CHECK(e.mean == doctest::Approx(1.0 / (1.0 + std::exp(-0.6))).epsilon(1e-9));
  CHECK(e.se < 1e-9);
}

TEST_CASE("toy world agrees with quadrature") {
  std::mt19937_64 gen(123);
  int inside = 0;
  const int worlds = 20;
  for (int i = 0; i < worlds; ++i) {
    const toy::World w = toy::random_world(gen, i % 2 == 0);
    McConfig mc;
    mc.n_samples = 10000;
    mc.seed = 1000 + i;
    auto e = esv_at(toy::observations(w), w.mixture, toy::valuer(w), mc);
    const double exact = toy::expected_value(w);
    inside += std::abs(e.mean - exact) <= 3 * e.se + 1e-12;
  }
  CHECK(inside >= 18);
}

TEST_CASE("estimates are deterministic and batch independent") {
  std::mt19937_64 gen(9);
  const toy::World w = toy::random_world(gen, false);
  McConfig a;
  a.n_samples = 3000;
  a.seed = 4;
  McConfig b = a;
  b.batch = 7;
  auto ea = esv_at(toy::observations(w), w.mixture, toy::valuer(w), a);
  auto eb = esv_at(toy::observations(w), w.mixture, toy::valuer(w), b);
  CHECK(ea.mean == eb.mean);
  CHECK(ea.se == eb.se);
  CHECK(ea.error_fraction == eb.error_fraction);
  McConfig c = a;
  c.seed = 5;
  CHECK(esv_at(toy::observations(w), w.mixture, toy::valuer(w), c).mean != ea.mean);
  McConfig bad;
  bad.n_samples = 0;
  CHECK_THROWS_AS(esv_at(toy::observations(w), w.mixture, toy::valuer(w), bad), InvalidArgument);
  CHECK_THROWS_AS(esv_at(ObservationSet(3), w.mixture, toy::valuer(w), a), InvalidArgument);
}

TEST_CASE("standard error shrinks as one over root n") {
  std::mt19937_64 gen(31);
  const toy::World w = toy::random_world(gen, true);
  double ratio = 0.0;
  for (int r = 0; r < 10; ++r) {
    McConfig small, large;
    small.n_samples = 1000;
    large.n_samples = 4000;
    small.seed = derive_seed(7, r);
    large.seed = derive_seed(8, r);
    ratio += esv_at(toy::observations(w), w.mixture, toy::valuer(w), large).se /
             esv_at(toy::observations(w), w.mixture, toy::valuer(w), small).se;
  }
  CHECK(ratio / 10 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("VAST with a receiver-blind outcome model equals the pointwise value") {
  const auto& corpus = rally_corpus();
  auto mix = single(corpus.mean, corpus.cov);
  auto model = linear_model(-1.0, {{"impact_speed", 0.03}, {"bounce_y", 0.05}});
  McConfig mc;
  mc.n_samples = 200;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& enc = corpus.encodings[i];
    auto r = vacc(enc, rally_context(), mix, model, mc);
    CHECK(r.vast.mean == doctest::Approx(r.pointwise).epsilon(1e-9));
    CHECK(r.vast.se < 1e-9);
    CHECK(std::abs(r.value) < 1e-9);
    CHECK(r.value == r.vast.mean - r.pointwise);
  }
}

TEST_CASE("VAST matches enumeration over discrete receivers") {
  const auto& corpus = rally_corpus();
  const auto& enc = corpus.encodings[3];
  const auto& L = enc.layout();
  // Components share the shooter/ball block and differ only in the receiver.
  std::vector<MixtureComponent> comps;
  const double weights[3] = {0.2, 0.5, 0.3};
  std::vector<VectorXd> receivers;
  MatrixXd cov = corpus.cov;
  for (int i : L.receiver_set()) {
    cov.row(i).setZero();
    cov.col(i).setZero();
    cov(i, i) = 1e-10;
  }
  for (int k = 0; k < 3; ++k) {
    VectorXd m = corpus.mean;
    m(L.receiver(Axis::x, 0)) = -3.0 + 3.0 * k;
    m(L.receiver(Axis::y, 0)) = 10.0 + 1.5 * k;
    m(L.receiver(Axis::x, 1)) = 0.5 * k;
    m(L.receiver(Axis::y, 1)) = -1.0;
    comps.push_back({weights[k], m, cov});
    receivers.push_back(m);
  }
  MixtureModel mix(comps);
  auto model = linear_model(-1.5, {{"required_speed", 0.3}, {"receiver_x", 0.1}, {"bounce_x", 0.2}});
  const ShotContext ctx = rally_context();
  double exact = 0.0;
  for (int k = 0; k < 3; ++k) {
    VectorXd v = enc.values;
    for (int i : L.receiver_set()) v(i) = receivers[k](i);
    exact += weights[k] * pointwise_value(FunctionalEncoding(enc.flag, v), ctx, model);
  }
  McConfig mc;
  mc.n_samples = 4000;
  auto e = vast(enc, ctx, mix, model, mc);
  CHECK(std::abs(e.mean - exact) <= 3 * e.se);
  CHECK(e.se > 0.0);
  // The unconditional marginal is the same here because the blocks are independent.
  auto u = vast(enc, ctx, mix, model, mc, ReceiverMarginal::unconditional);
  CHECK(std::abs(u.mean - exact) <= 3 * u.se);
}

TEST_CASE("Shot IQ with a model on the fixed features") {
  const auto& corpus = rally_corpus();
  auto mix = single(corpus.mean, corpus.cov);
  auto model = linear_model(-0.5, {{"bounce_x", 0.3}, {"bounce_y", -0.1}, {"receiver_x", 0.05}, {"receiver_y", 0.02}});
  McConfig mc;
  mc.n_samples = 300;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& enc = corpus.encodings[i];
    auto e = shot_iq(enc, rally_context(), mix, model, mc);
    const double p = pointwise_value(enc, rally_context(), model);
    // Futures that clear the net keep the observed features.
    CHECK(e.mean == doctest::Approx(p * (1.0 - e.error_fraction)).epsilon(1e-8));
  }
  SUBCASE("constraints fix the bounce point") {
    const auto& enc = corpus.encodings[0];
    auto obs = shot_iq_constraints(enc);
    CHECK(obs.size() == 7);
    auto cm = condition_mixture(mix, obs);
    const auto b = bounce_location(enc);
    for (int i = 0; i < 20; ++i) {
      FunctionalEncoding f(enc.flag, sample_future(cm, 3, i));
      CHECK(f.ball(0, Axis::x)(b.t) == doctest::Approx(b.x).epsilon(1e-6));
      CHECK(f.ball(0, Axis::y)(b.t) == doctest::Approx(b.y).epsilon(1e-6));
      CHECK(std::abs(f.ball(0, Axis::z)(b.t)) < 1e-6);
    }
  }
  SUBCASE("no-bounce shots are rejected") {
    FunctionalEncoding nb(BounceFlag::no_bounce, VectorXd::Zero(21));
    CHECK_THROWS_AS(shot_iq_constraints(nb), InvalidArgument);
  }
}

TEST_CASE("mismatched layouts are rejected") {
  const auto& corpus = rally_corpus();
  auto mix = single(corpus.mean.head(21), corpus.cov.topLeftCorner(21, 21));
  auto model = linear_model(0.0, {});
  CHECK_THROWS_AS(vast(corpus.encodings[0], rally_context(), mix, model, McConfig{}), InvalidArgument);
}

TEST_CASE("aggregation") {
  auto row = [](std::string shooter, std::string receiver, ShotType t, std::string metric, double v) {
    return MetricSample{"s", t, std::move(shooter), std::move(receiver), std::move(metric), v};
  };
  SUBCASE("singleton") {
    auto r = aggregate({row("a", "b", ShotType::serve, "vast", 0.4)});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].player_id == "a");
    CHECK(r.rows[0].mean == 0.4);
    CHECK(r.rows[0].n == 1);
    CHECK(r.rows[0].se == 0.0);
  }
  SUBCASE("hand-computed group means") {
    std::vector<MetricSample> rows{row("a", "x", ShotType::rally, "vast", 0.1),
                                   row("a", "y", ShotType::rally, "vast", 0.4),
                                   row("a", "x", ShotType::rally, "vast", 0.7),
                                   row("b", "x", ShotType::rally, "vacc", -0.2),
                                   row("c", "x", ShotType::rally, "vacc", 0.6)};
    auto r = aggregate(rows);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].player_id == "a");
    CHECK(r.rows[0].mean == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.rows[0].se == doctest::Approx(std::sqrt(0.09 / 3)).epsilon(1e-12));
    CHECK(r.rows[1].player_id == "x");
    CHECK(r.rows[1].metric == "vacc");
    CHECK(r.rows[1].mean == doctest::Approx(0.2));
    std::reverse(rows.begin(), rows.end());
    auto again = aggregate(rows);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      CHECK(again.rows[i].mean == r.rows[i].mean);
      CHECK(again.rows[i].se == r.rows[i].se);
    }
  }
  SUBCASE("centering of identical players") {
    std::vector<MetricSample> rows;
    for (const char* p : {"a", "b", "c"}) {
      for (double v : {0.2, 0.3, 0.5}) rows.push_back(row(p, "r", ShotType::serve, "shot_iq", v));
    }
    auto r = aggregate(rows);
    REQUIRE(r.rows.size() == 3);
    for (const auto& x : r.rows) {
      CHECK(x.metric == "shot_iq_over_average");
      CHECK(std::abs(x.mean) < 1e-15);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(aggregate({}), InvalidArgument);
    CHECK_THROWS_AS(aggregate({row("a", "b", ShotType::serve, "mystery", 0.1)}), InvalidArgument);
    AggregateOptions bad;
    bad.keys = {{"vast", "umpire_id"}};
    CHECK_THROWS_AS(aggregate({row("a", "b", ShotType::serve, "vast", 0.1)}, bad), InvalidArgument);
  }
  SUBCASE("csv") {
    std::ostringstream out;
    write_metric_report_csv(out, aggregate({row("a", "b", ShotType::serve_return, "vast", 0.25)}));
    CHECK(out.str() == "player_id,shot_type,metric,mean,se,n\na,serve_return,vast,0.25,0,1\n");
  }
}

TEST_CASE("heat maps") {
  GridSpec g;
  g.cell_size = 1.0;
  g.x_min = 0;
  g.x_max = 3;
  g.y_min = 0;
  g.y_max = 2;
  SUBCASE("singleton") {
    auto cells = heatmap({{1.5, 0.5, 0.3}}, g);
    REQUIRE(cells.size() == 6);
    int nonempty = 0;
    for (const auto& c : cells) {
      if (c.count == 0) {
        CHECK_FALSE(c.mean.has_value());
        continue;
      }
      ++nonempty;
      CHECK(c.x == 1.5);
      CHECK(c.y == 0.5);
      CHECK(*c.mean == 0.3);
    }
    CHECK(nonempty == 1);
  }
  SUBCASE("constant field and count conservation") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> ux(-1, 4), uy(-1, 3);
    std::vector<LocatedValue> pts;
    std::size_t inside = 0;
    for (int i = 0; i < 500; ++i) {
      LocatedValue v{ux(gen), uy(gen), 0.42};
      inside += v.x >= 0 && v.x <= 3 && v.y >= 0 && v.y <= 2;
      pts.push_back(v);
    }
    auto cells = heatmap(pts, g);
    std::size_t total = 0;
    for (const auto& c : cells) {
      total += c.count;
      if (c.count) CHECK(*c.mean == doctest::Approx(0.42).epsilon(1e-14));
    }
    CHECK(total == inside);
  }
  SUBCASE("errors and csv") {
    GridSpec bad = g;
    bad.cell_size = 0;
    CHECK_THROWS_AS(heatmap({}, bad), InvalidArgument);
    CHECK_THROWS_AS(heatmap({{0.5, 0.5, NAN}}, g), InvalidArgument);
    std::ostringstream out;
    g.x_max = 1;
    g.y_max = 1;
    write_heatmap_csv(out, heatmap({}, g));
    CHECK(out.str() == "cell_x,cell_y,mean,count\n0.5,0.5,,0\n");
  }
}
