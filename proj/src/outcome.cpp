#include "shotvalue/outcome.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "shotvalue/error.hpp"
#include "shotvalue/rng.hpp"

namespace shotvalue {

using Eigen::MatrixXd;
using Eigen::VectorXd;

GoodPosition good_position(const FunctionalEncoding& enc, double horizon) {
  if (enc.flag != BounceFlag::one_bounce) throw GeometryError("good position needs a second arc");
  const BouncePoint bounce = bounce_location(enc, horizon);
  const double exit = enc.duration_value();
  if (!(exit > 0.0)) throw GeometryError("second arc has non-positive duration");
  const Cubic z = enc.ball(1, Axis::z);
  GoodPosition g;
  double local;
  if (auto root = smallest_root_in(z.shifted(1.0), 0.0, exit)) {
    local = *root;
  } else {
    // Highest point of the arc over (0, exit].
    local = exit;
    const double a = 3.0 * z.c[3], b = 2.0 * z.c[2], c = z.c[1];
    std::vector<double> candidates;
    if (a != 0.0) {
      const double disc = b * b - 4 * a * c;
      if (disc >= 0) {
        candidates.push_back((-b + std::sqrt(disc)) / (2 * a));
        candidates.push_back((-b - std::sqrt(disc)) / (2 * a));
      }
    } else if (b != 0.0) {
      candidates.push_back(-c / b);
    }
    for (double t : candidates) {
      if (t > 0.0 && t < exit && z(t) > z(local)) local = t;
    }
    g.fallback = true;
  }
  g.x = enc.ball(1, Axis::x)(local);
  g.y = enc.ball(1, Axis::y)(local);
  g.t = bounce.t + local;
  return g;
}

namespace {

// Time at which arc 1 crosses the net plane, if it does before it ends.
std::optional<double> net_crossing(const FunctionalEncoding& enc, double arc_end) {
  return smallest_root_in(enc.ball(0, Axis::y), 0.0, arc_end);
}

double arc1_end(const FunctionalEncoding& enc, double horizon) {
  return enc.flag == BounceFlag::one_bounce ? bounce_location(enc, horizon).t : enc.duration_value();
}

}  // namespace

bool classify_error(const FunctionalEncoding& enc, ShotType shot_type, const CourtGeometry& geometry,
                    double horizon) {
  if (enc.flag != BounceFlag::one_bounce) return false;
  const BouncePoint b = bounce_location(enc, horizon);
  const auto cross = net_crossing(enc, b.t);
  if (!cross) return true;
  if (enc.ball(0, Axis::z)(*cross) < geometry.net_height_center) return true;
  if (shot_type == ShotType::serve) {
    const double server_x = enc.shooter(Axis::x)(0.0);
    const CourtRegion box = server_x >= 0.0 ? CourtRegion::deuce_service_box : CourtRegion::ad_service_box;
    return !in_bounds(b.x, b.y, box, geometry);
  }
  return !(b.y >= 0.0 && in_bounds(b.x, b.y, CourtRegion::singles_court, geometry));
}

ShotFeatures extract_features(const FunctionalEncoding& enc, Handedness receiver_hand, ShotType shot_type,
                              double horizon) {
  ShotFeatures f;
  f.shot_type = shot_type;
  f.one_bounce = enc.flag == BounceFlag::one_bounce;
  auto velocity = [&](int arc, double t) {
    return std::hypot(enc.ball(arc, Axis::x).derivative(t), enc.ball(arc, Axis::y).derivative(t),
                      enc.ball(arc, Axis::z).derivative(t));
  };
  f.impact_speed = velocity(0, 0.0);
  const double end1 = arc1_end(enc, horizon);
  const auto cross = net_crossing(enc, end1);
  if (!cross) throw GeometryError("ball never crosses the net plane");
  f.net_height = enc.ball(0, Axis::z)(*cross);
  f.bounce_x = enc.ball(0, Axis::x)(end1);
  f.bounce_y = enc.ball(0, Axis::y)(end1);
  f.bounce_speed = velocity(0, end1);
  if (f.one_bounce) {
    f.good = good_position(enc, horizon);
  } else {
    f.good = {f.bounce_x, f.bounce_y, end1, false};
  }
  f.receiver_x = enc.receiver(Axis::x)(0.0);
  f.receiver_y = enc.receiver(Axis::y)(0.0);
  f.receiver_left = receiver_hand == Handedness::left;
  f.distance_to_good = std::hypot(f.good.x - f.receiver_x, f.good.y - f.receiver_y);
  if (!(f.good.t > 0.0)) throw GeometryError("good position at non-positive time");
  f.required_speed = f.distance_to_good / f.good.t;
  return f;
}

const std::vector<std::string>& outcome_feature_names() {
  static const std::vector<std::string> names{
      "impact_speed", "bounce_speed",     "net_height",     "bounce_x",      "bounce_y",  "receiver_x",
      "receiver_y",   "receiver_left",    "distance_to_good", "required_speed", "one_bounce"};
  return names;
}

VectorXd feature_vector(const ShotFeatures& f) {
  VectorXd v(11);
  v << f.impact_speed, f.bounce_speed, f.net_height, f.bounce_x, f.bounce_y, f.receiver_x, f.receiver_y,
      f.receiver_left ? 1.0 : 0.0, f.distance_to_good, f.required_speed, f.one_bounce ? 1.0 : 0.0;
  return v;
}

int Term::size() const {
  switch (kind) {
    case TermKind::linear: return 1;
    case TermKind::smooth: return bases.at(0).size();
    case TermKind::tensor: return bases.at(0).size() * bases.at(1).size();
  }
  return 0;
}

OutcomeModel::OutcomeModel(std::vector<std::string> feature_names, std::vector<Term> terms, VectorXd coefficients,
                           std::array<double, 2> lambda)
    : names_(std::move(feature_names)), terms_(std::move(terms)), coef_(std::move(coefficients)), lambda_(lambda) {
  for (const auto& t : terms_) {
    const std::size_t need = t.kind == TermKind::tensor ? 2 : 1;
    if (t.features.size() != need) throw InvalidArgument("term has the wrong number of features");
    if (t.kind != TermKind::linear && t.bases.size() != need) throw InvalidArgument("term has the wrong number of bases");
    for (int f : t.features) {
      if (f < 0 || f >= static_cast<int>(names_.size())) throw InvalidArgument("term feature index out of range");
    }
  }
  if (coef_.size() != design_size()) {
    throw InvalidArgument("outcome model has " + std::to_string(coef_.size()) + " coefficients, design needs " +
                          std::to_string(design_size()));
  }
  if (!coef_.allFinite()) throw InvalidArgument("outcome coefficients are not finite");
}

OutcomeModel OutcomeModel::zero(std::vector<std::string> feature_names, std::vector<Term> terms) {
  int p = 1;
  for (const auto& t : terms) p += t.size();
  return OutcomeModel(std::move(feature_names), std::move(terms), VectorXd::Zero(p), {0.0, 0.0});
}

int OutcomeModel::design_size() const {
  int p = 1;
  for (const auto& t : terms_) p += t.size();
  return p;
}

void OutcomeModel::design_row(const VectorXd& features, double* out) const {
  if (features.size() != static_cast<Eigen::Index>(names_.size())) {
    throw InvalidArgument("expected " + std::to_string(names_.size()) + " features, got " +
                          std::to_string(features.size()));
  }
  *out++ = 1.0;
  for (const auto& t : terms_) {
    switch (t.kind) {
      case TermKind::linear:
        *out++ = features(t.features[0]);
        break;
      case TermKind::smooth:
        t.bases[0].evaluate(features(t.features[0]), out);
        out += t.bases[0].size();
        break;
      case TermKind::tensor: {
        const VectorXd a = t.bases[0].evaluate(features(t.features[0]));
        const VectorXd b = t.bases[1].evaluate(features(t.features[1]));
        for (Eigen::Index i = 0; i < a.size(); ++i) {
          for (Eigen::Index j = 0; j < b.size(); ++j) *out++ = a(i) * b(j);
        }
        break;
      }
    }
  }
}

double OutcomeModel::linear_predictor(const VectorXd& features) const {
  VectorXd row(design_size());
  design_row(features, row.data());
  return row.dot(coef_);
}

namespace {

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

}  // namespace

double predict_win(const OutcomeModel& model, const VectorXd& features) {
  return sigmoid(model.linear_predictor(features));
}

double predict_win(const OutcomeModel& model, const ShotFeatures& features) {
  return predict_win(model, feature_vector(features));
}

void OutcomeConfig::validate() const {
  if (spline_interior_knots < 0) throw InvalidArgument("spline_interior_knots must be non-negative");
  if (tensor_basis_size < 4) throw InvalidArgument("tensor_basis_size must be at least 4");
  if (lambda_grid.empty()) throw InvalidArgument("lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0)) throw InvalidArgument("lambda grid values must be positive");
  }
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    throw InvalidArgument("validation_fraction must lie in (0, 1)");
  }
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
}

std::vector<TermSpec> default_terms() {
  return {{TermKind::smooth, {"impact_speed"}},   {TermKind::smooth, {"bounce_speed"}},
          {TermKind::smooth, {"net_height"}},     {TermKind::smooth, {"receiver_x"}},
          {TermKind::smooth, {"receiver_y"}},     {TermKind::smooth, {"distance_to_good"}},
          {TermKind::smooth, {"required_speed"}}, {TermKind::tensor, {"bounce_x", "bounce_y"}},
          {TermKind::linear, {"receiver_left"}},  {TermKind::linear, {"one_bounce"}}};
}

TrainReport evaluate(const VectorXd& predicted, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(predicted.size());
  if (n != labels.size()) throw InvalidArgument("prediction and label counts differ");
  if (n == 0) throw InvalidArgument("nothing to evaluate");
  TrainReport r;
  r.rows = n;
  double loss = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(predicted(i), 1e-15, 1.0 - 1e-15);
    loss -= labels[i] ? std::log(p) : std::log1p(-p);
    const bool call = predicted(i) >= 0.5;
    if (call && labels[i]) ++tp;
    else if (call) ++fp;
    else if (labels[i]) ++fn;
    else ++tn;
  }
  r.log_loss = loss / static_cast<double>(n);
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  r.win_precision = ratio(tp, tp + fp);
  r.win_recall = ratio(tp, tp + fn);
  r.in_play_precision = ratio(tn, tn + fn);
  r.in_play_recall = ratio(tn, tn + fp);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return predicted(a) < predicted(b); });
  const std::size_t bins = std::min<std::size_t>(10, n);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t from = b * n / bins, to = (b + 1) * n / bins;
    CalibrationBin bin;
    bin.count = to - from;
    for (std::size_t i = from; i < to; ++i) {
      bin.mean_predicted += predicted(order[i]);
      bin.observed += labels[order[i]];
    }
    bin.mean_predicted /= static_cast<double>(bin.count);
    bin.observed /= static_cast<double>(bin.count);
    bin.lower = b == 0 ? 0.0 : 0.5 * (predicted(order[from - 1]) + predicted(order[from]));
    bin.upper = b + 1 == bins ? 1.0 : 0.5 * (predicted(order[to - 1]) + predicted(order[to]));
    r.calibration.push_back(bin);
  }
  return r;
}

namespace {

double objective(const MatrixXd& x, const VectorXd& y, const VectorXd& beta, const VectorXd& penalty) {
  const VectorXd eta = x * beta;
  double v = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) v += softplus(eta(i)) - y(i) * eta(i);
  return v + 0.5 * (penalty.array() * beta.array().square()).sum();
}

// Penalized Newton iterations with step halving.
VectorXd irls(const MatrixXd& x, const VectorXd& y, const VectorXd& penalty, VectorXd beta, int max_iterations,
              double tolerance) {
  double obj = objective(x, y, beta, penalty);
  for (int it = 1; it <= max_iterations; ++it) {
    const VectorXd eta = x * beta;
    VectorXd p(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p(i) = sigmoid(eta(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    MatrixXd h = x.transpose() * (x.array().colwise() * w.array()).matrix();
    h.diagonal() += penalty;
    const VectorXd grad = x.transpose() * (y - p) - penalty.cwiseProduct(beta);
    const VectorXd delta = h.ldlt().solve(grad);
    if (!delta.allFinite()) throw NumericError("IRLS diverged at iteration " + std::to_string(it));
    double step = 1.0;
    double next = objective(x, y, beta + delta, penalty);
    int halvings = 0;
    while (!(next <= obj + 1e-12 * std::abs(obj))) {
      if (++halvings > 40) {
        // No descent along the Newton direction: at the optimum to rounding.
        if (grad.cwiseAbs().maxCoeff() < 1e-6 * (1.0 + std::abs(obj))) return beta;
        throw NumericError("IRLS diverged at iteration " + std::to_string(it));
      }
      step *= 0.5;
      next = objective(x, y, beta + step * delta, penalty);
    }
    beta += step * delta;
    const double change = obj - next;
    obj = next;
    if (change <= tolerance * (std::abs(obj) + 0.1)) return beta;
  }
  throw NumericError("IRLS did not converge within " + std::to_string(max_iterations) + " iterations");
}

std::uint64_t row_hash(const double* values, Eigen::Index n, int label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t bytes) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = values[i] == 0.0 ? 0.0 : values[i];  // fold -0 into +0
    mix(&v, sizeof v);
  }
  mix(&label, sizeof label);
  return splitmix64(h);
}

int find_feature(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("unknown feature '" + name + "' in term list");
  return static_cast<int>(it - names.begin());
}

}  // namespace

OutcomeFit fit_outcome(const MatrixXd& features, const std::vector<int>& labels,
                       const std::vector<std::string>& feature_names, const OutcomeConfig& config) {
  config.validate();
  const auto n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw InvalidArgument("feature and label counts differ");
  if (features.cols() != static_cast<Eigen::Index>(feature_names.size())) {
    throw InvalidArgument("feature matrix has " + std::to_string(features.cols()) + " columns, names " +
                          std::to_string(feature_names.size()));
  }
  if (n < static_cast<Eigen::Index>(kMinOutcomeRows)) throw InvalidArgument("need at least " + std::to_string(kMinOutcomeRows) + " rows to fit, got " + std::to_string(n));
  if (!features.allFinite()) throw InvalidArgument("features contain non-finite values");
  std::size_t wins = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidArgument("labels must be 0 (in play) or 1 (win)");
    wins += static_cast<std::size_t>(l);
  }
  if (wins == 0 || wins == labels.size()) throw InvalidArgument("single-class labels");

  // Canonical row order: by content hash, then content.
  std::vector<std::uint64_t> hash(n);
  std::vector<std::vector<double>> content(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    content[i].resize(features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) content[i][j] = features(i, j);
    hash[i] = row_hash(content[i].data(), features.cols(), labels[i]);
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (hash[a] != hash[b]) return hash[a] < hash[b];
    if (content[a] != content[b]) return content[a] < content[b];
    return labels[a] < labels[b];
  });

  // Terms with knots from the full data.
  std::vector<Term> terms;
  const auto specs = config.terms.empty() ? default_terms() : config.terms;
  auto column = [&](int f) {
    std::vector<double> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = features(order[i], f);
    return v;
  };
  for (const auto& spec : specs) {
    Term t;
    t.kind = spec.kind;
    for (const auto& name : spec.features) t.features.push_back(find_feature(feature_names, name));
    const std::size_t need = spec.kind == TermKind::tensor ? 2 : 1;
    if (t.features.size() != need) throw InvalidArgument("term has the wrong number of features");
    switch (spec.kind) {
      case TermKind::linear:
        t.group = 0;
        break;
      case TermKind::smooth:
        t.group = 1;
        t.bases.push_back(BSplineBasis::from_quantiles(column(t.features[0]), config.spline_interior_knots));
        break;
      case TermKind::tensor:
        t.group = 2;
        for (int f : t.features) {
          t.bases.push_back(BSplineBasis::from_quantiles(column(f), config.tensor_basis_size - 4));
        }
        break;
    }
    terms.push_back(std::move(t));
  }
  const OutcomeModel shape = OutcomeModel::zero(feature_names, terms);
  const int p = shape.design_size();

  MatrixXd x(n, p);
  VectorXd y(n);
  {
    VectorXd row(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      shape.design_row(features.row(order[i]).transpose(), row.data());
      x.row(i) = row.transpose();
      y(i) = labels[order[i]];
    }
  }

  std::vector<Eigen::Index> train, valid;
  const auto cut = static_cast<std::uint64_t>(config.validation_fraction * 1e6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t h = derive_seed(config.seed, hash[order[i]]);
    (h % 1000000 < cut ? valid : train).push_back(i);
  }
  if (train.empty() || valid.empty()) throw InvalidArgument("validation split left an empty side");
  const MatrixXd xt = x(train, Eigen::all);
  const VectorXd yt = y(train);
  const MatrixXd xv = x(valid, Eigen::all);
  std::vector<int> yv(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) yv[i] = static_cast<int>(y(valid[i]));
  if (yt.sum() == 0 || yt.sum() == static_cast<double>(yt.size())) {
    throw InvalidArgument("single-class labels in the training split");
  }

  auto penalty_for = [&](const std::array<double, 2>& lambda) {
    VectorXd pen(p);
    pen(0) = 0.0;
    int at = 1;
    for (const auto& t : terms) {
      const double v = t.group == 0 ? 1e-8 : lambda[t.group - 1];
      pen.segment(at, t.size()).setConstant(v);
      at += t.size();
    }
    return pen;
  };
  const bool has_smooth = std::any_of(terms.begin(), terms.end(), [](const Term& t) { return t.group == 1; });
  const bool has_tensor = std::any_of(terms.begin(), terms.end(), [](const Term& t) { return t.group == 2; });
  const std::vector<double> unused{config.lambda_grid.front()};
  const auto& grid1 = has_smooth ? config.lambda_grid : unused;
  const auto& grid2 = has_tensor ? config.lambda_grid : unused;

  TrainReport report;
  std::optional<std::array<double, 2>> best;
  double best_loss = std::numeric_limits<double>::infinity();
  VectorXd best_valid_pred;
  VectorXd warm = VectorXd::Zero(p);
  for (double l1 : grid1) {
    for (double l2 : grid2) {
      const std::array<double, 2> lambda{l1, l2};
      warm = irls(xt, yt, penalty_for(lambda), warm, config.max_iterations, config.tolerance);
      VectorXd pred = (xv * warm).unaryExpr([](double e) { return sigmoid(e); });
      const double loss = evaluate(pred, yv).log_loss;
      report.grid.push_back({lambda, loss});
      if (loss < best_loss) {
        best_loss = loss;
        best = lambda;
        best_valid_pred = std::move(pred);
      }
    }
  }
  TrainReport scored = evaluate(best_valid_pred, yv);
  scored.grid = std::move(report.grid);

  const VectorXd beta = irls(x, y, penalty_for(*best), VectorXd::Zero(p), config.max_iterations, config.tolerance);
  OutcomeFit out;
  out.model = OutcomeModel(feature_names, std::move(terms), beta, *best);
  out.report = std::move(scored);
  out.fitted.resize(n);
  const VectorXd eta = x * beta;
  for (Eigen::Index i = 0; i < n; ++i) out.fitted(order[i]) = sigmoid(eta(i));
  return out;
}

}  // namespace shotvalue
