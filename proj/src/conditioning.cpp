#include "shotvalue/conditioning.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "shotvalue/error.hpp"
#include "shotvalue/rng.hpp"
#include "text.hpp"

namespace shotvalue {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ObservationSet::add(LinearConstraint c) {
  if (c.row.size() != dim_) {
    throw InvalidArgument("constraint has length " + std::to_string(c.row.size()) + ", expected " +
                          std::to_string(dim_));
  }
  if (c.row.isZero(0.0)) throw InvalidArgument("constraint row is all zeros");
  if (!c.row.allFinite() || !std::isfinite(c.value)) throw InvalidArgument("constraint is not finite");
  if (!(c.noise_var >= 0.0) || !std::isfinite(c.noise_var)) {
    throw InvalidArgument("observation noise variance must be finite and non-negative");
  }
  constraints_.push_back(std::move(c));
}

void ObservationSet::add_unit(int index, double value, double noise_var) {
  if (index < 0 || index >= dim_) throw InvalidArgument("feature index out of range");
  LinearConstraint c{VectorXd::Zero(dim_), value, noise_var};
  c.row(index) = 1.0;
  add(std::move(c));
}

MatrixXd ObservationSet::matrix() const {
  MatrixXd c(size(), dim_);
  for (std::size_t i = 0; i < size(); ++i) c.row(i) = constraints_[i].row.transpose();
  return c;
}

VectorXd ObservationSet::values() const {
  VectorXd v(size());
  for (std::size_t i = 0; i < size(); ++i) v(i) = constraints_[i].value;
  return v;
}

VectorXd ObservationSet::noise() const {
  VectorXd v(size());
  for (std::size_t i = 0; i < size(); ++i) v(i) = constraints_[i].noise_var;
  return v;
}

std::string_view to_string(ObservationKind k) {
  switch (k) {
    case ObservationKind::ball: return "ball";
    case ObservationKind::shooter: return "shooter";
    case ObservationKind::receiver: return "receiver";
    case ObservationKind::feature: return "feature";
  }
  return "?";
}

ObservationKind parse_observation_kind(std::string_view s) {
  if (s == "ball") return ObservationKind::ball;
  if (s == "shooter") return ObservationKind::shooter;
  if (s == "receiver") return ObservationKind::receiver;
  if (s == "feature") return ObservationKind::feature;
  throw ParseError("unknown observation kind '" + std::string(s) + "'");
}

ObservationSet constraints_from_observations(const std::vector<Observation>& observations,
                                             const EncodingLayout& layout,
                                             std::optional<double> bounce_time_hint,
                                             std::optional<double> shot_end) {
  ObservationSet set(layout.dim());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Observation& o = observations[i];
    const std::string where = "observation " + std::to_string(i + 1);
    if (o.kind == ObservationKind::feature) {
      if (o.dim < 0 || o.dim >= layout.dim()) throw InvalidArgument(where + ": feature index out of range");
      set.add_unit(o.dim, o.value, o.noise_var);
      continue;
    }
    if (!(o.t >= 0.0)) throw InvalidArgument(where + ": negative timestamp");
    if (shot_end && o.t > *shot_end) throw InvalidArgument(where + ": after the end of the shot");
    VectorXd row = VectorXd::Zero(layout.dim());
    if (o.kind == ObservationKind::ball) {
      if (o.dim < 0 || o.dim > 2) throw InvalidArgument(where + ": ball axis must be x, y or z");
      int arc = 0;
      double local = o.t;
      if (bounce_time_hint && o.t > *bounce_time_hint) {
        if (layout.arcs() < 2) {
          throw InvalidArgument(where + ": after the bounce hint but the layout has no second arc");
        }
        arc = 1;
        local = o.t - *bounce_time_hint;
      }
      double power = 1.0;
      for (int k = 0; k < 4; ++k) {
        row(layout.ball(arc, static_cast<Axis>(o.dim), k)) = power;
        power *= local;
      }
    } else {
      if (o.dim < 0 || o.dim > 1) throw InvalidArgument(where + ": player axis must be x or y");
      const auto axis = static_cast<Axis>(o.dim);
      const bool shooter = o.kind == ObservationKind::shooter;
      row(shooter ? layout.shooter(axis, 0) : layout.receiver(axis, 0)) = 1.0;
      row(shooter ? layout.shooter(axis, 1) : layout.receiver(axis, 1)) = o.t;
    }
    set.add({std::move(row), o.value, o.noise_var});
  }
  return set;
}

namespace {

int parse_axis(std::string_view s, std::size_t line) {
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw ParseError("unknown axis '" + std::string(s) + "'", line);
}


}  // namespace

std::vector<Observation> read_observations_csv(std::istream& in, const EncodingLayout& layout) {
  std::vector<Observation> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    const auto f = detail::split_csv(line);
    if (!header) {
      if (f.size() != 5 || f[0] != "kind" || f[1] != "t" || f[2] != "dim" || f[3] != "value" ||
          f[4] != "noise_var") {
        throw ParseError("observation header must be kind,t,dim,value,noise_var", line_no);
      }
      header = true;
      continue;
    }
    if (f.size() != 5) throw ParseError("expected 5 columns", line_no);
    Observation o;
    try {
      o.kind = parse_observation_kind(f[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (o.kind == ObservationKind::feature) {
      o.t = f[1].empty() ? 0.0 : parse_double(f[1], line_no);
      if (auto idx = layout.index_of(f[2])) {
        o.dim = *idx;
      } else {
        const double v = parse_double(f[2], line_no);
        if (v != std::floor(v)) throw ParseError("feature index must be an integer", line_no);
        o.dim = static_cast<int>(v);
      }
    } else {
      o.t = parse_double(f[1], line_no);
      o.dim = parse_axis(f[2], line_no);
    }
    o.value = parse_double(f[3], line_no);
    o.noise_var = f[4].empty() ? kDefaultObservationNoise : parse_double(f[4], line_no);
    out.push_back(o);
  }
  return out;
}

void write_observations_csv(std::ostream& out, const std::vector<Observation>& observations,
                            const EncodingLayout& layout) {
  out << "kind,t,dim,value,noise_var\n";
  for (const auto& o : observations) {
    out << to_string(o.kind) << ',' << format_double(o.t) << ',';
    if (o.kind == ObservationKind::feature) out << layout.names().at(o.dim);
    else out << "xyz"[o.dim];
    out << ',' << format_double(o.value) << ',' << format_double(o.noise_var) << '\n';
  }
}

namespace {

// Square-root form of the constraint system. With Sigma = F F', B = C F and
// D = diag(sqrt(noise)), the QR factorization [B'; D] = Q R gives
// C Sigma C' + D^2 = R'R and B' (R'R)^{-1} = Q_top R^{-T}, which keeps the
// conditioning of the update at the square root of the Gram matrix's.
struct ConstraintFactor {
  MatrixXd q_top;  // d x m
  MatrixXd r;      // m x m upper triangular
};

MatrixXd covariance_factor(const MatrixXd& covariance) {
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(covariance);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

ConstraintFactor factor_constraints(const MatrixXd& f, const MatrixXd& c, const VectorXd& noise) {
  const auto d = f.rows();
  const auto m = c.rows();
  MatrixXd stacked(d + m, m);
  stacked.topRows(d) = (c * f).transpose();
  stacked.bottomRows(m) = noise.cwiseSqrt().asDiagonal();
  Eigen::HouseholderQR<MatrixXd> qr(stacked);
  ConstraintFactor out;
  out.r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  out.q_top = (qr.householderQ() * MatrixXd::Identity(d + m, m)).topRows(d);
  const VectorXd diag = out.r.diagonal().cwiseAbs();
  const double scale = std::max(diag.maxCoeff(), std::sqrt(c.rowwise().squaredNorm().maxCoeff()) * 1e-300);
  // Positive noise keeps the system definite; only zero-noise systems are
  // tested for redundancy.
  const bool exact = noise.minCoeff() == 0.0;
  if (!(diag.minCoeff() > 0.0) || (exact && diag.minCoeff() < 1e-7 * scale)) {
    throw NumericError("singular constraint Gram matrix (redundant constraints?)");
  }
  return out;
}

void check_shapes(const VectorXd& mean, const MatrixXd& covariance, const MatrixXd& c, const VectorXd& x,
                  const VectorXd& noise) {
  const auto d = mean.size();
  const auto m = c.rows();
  if (covariance.rows() != d || covariance.cols() != d || c.cols() != d || x.size() != m ||
      noise.size() != m) {
    throw InvalidArgument("conditioning shapes are inconsistent");
  }
}

GaussianConditional condition_factored(const VectorXd& mean, const MatrixXd& covariance, const MatrixXd& f,
                                       const MatrixXd& c, const VectorXd& x, const VectorXd& noise) {
  if (c.rows() == 0) return {mean, covariance};
  const ConstraintFactor cf = factor_constraints(f, c, noise);
  const VectorXd w = cf.r.transpose().triangularView<Eigen::Lower>().solve(x - c * mean);
  const MatrixXd p = f * cf.q_top;
  GaussianConditional out;
  out.mean = mean + p * w;
  out.covariance = covariance - p * p.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

}  // namespace

GaussianConditional condition_gaussian(const VectorXd& mean, const MatrixXd& covariance, const MatrixXd& c,
                                       const VectorXd& x, const VectorXd& noise) {
  check_shapes(mean, covariance, c, x, noise);
  return condition_factored(mean, covariance, covariance_factor(covariance), c, x, noise);
}

VectorXd update_weights(const MixtureModel& model, const ObservationSet& obs) {
  const int kc = model.size();
  if (kc == 0) throw InvalidArgument("mixture is empty");
  if (obs.empty()) return model.weights();
  if (obs.dim() != model.dim()) throw InvalidArgument("observation dimension does not match the mixture");
  const MatrixXd c = obs.matrix();
  const VectorXd x = obs.values();
  const VectorXd noise = obs.noise();
  const auto m = c.rows();
  const double log2pi = std::log(2.0 * M_PI);

  VectorXd logw(kc);
  // Smallest standardized residual of each observation across components.
  VectorXd best_z = VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  for (int k = 0; k < kc; ++k) {
    const auto& comp = model.component(k);
    ConstraintFactor cf;
    try {
      cf = factor_constraints(model.cholesky(k), c, noise);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " for component " + std::to_string(k));
    }
    const VectorXd resid = x - c * comp.mean;
    const VectorXd w = cf.r.transpose().triangularView<Eigen::Lower>().solve(resid);
    const double logdet = 2.0 * cf.r.diagonal().cwiseAbs().array().log().sum();
    logw(k) = std::log(comp.weight) - 0.5 * (static_cast<double>(m) * log2pi + logdet + w.squaredNorm());
    const VectorXd sd = cf.r.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < m; ++i) best_z(i) = std::min(best_z(i), std::abs(resid(i)) / sd(i));
  }
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) {
    Eigen::Index worst;
    best_z.maxCoeff(&worst);
    throw NumericError("all component likelihoods underflow; worst observation is constraint " +
                       std::to_string(worst + 1) + " (value " + format_double(x(worst)) + ", " +
                       format_double(best_z(worst)) + " sd from every component)");
  }
  VectorXd w = (logw.array() - top).exp();
  return w / w.sum();
}

VectorXd ConditionedMixture::weights() const {
  VectorXd w(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) w(k) = components[k].weight;
  return w;
}

VectorXd ConditionedMixture::mean() const {
  VectorXd m = VectorXd::Zero(dim);
  for (const auto& c : components) m += c.weight * c.mean;
  return m;
}

ConditionedMixture condition_mixture(const MixtureModel& model, const ObservationSet& obs,
                                     double prune_threshold) {
  const VectorXd post = update_weights(model, obs);
  const MatrixXd c = obs.empty() ? MatrixXd(0, model.dim()) : obs.matrix();
  const VectorXd x = obs.empty() ? VectorXd() : obs.values();
  const VectorXd noise = obs.empty() ? VectorXd() : obs.noise();

  ConditionedMixture out;
  out.dim = model.dim();
  out.constraint_count = obs.size();
  double kept = 0.0;
  for (int k = 0; k < model.size(); ++k) {
    if (post(k) < prune_threshold) continue;
    const auto& comp = model.component(k);
    GaussianConditional g = condition_factored(comp.mean, comp.covariance, model.cholesky(k), c, x, noise);
    ConditionedComponent cc;
    cc.weight = post(k);
    cc.mean = std::move(g.mean);
    cc.covariance = std::move(g.covariance);
    // Directions pinned by zero-noise constraints come back as rounding-level
    // eigenvalues of either sign; they are treated as exactly zero.
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cc.covariance);
    const double floor = 1e-12 * comp.covariance.diagonal().maxCoeff();
    const VectorXd scale =
        eig.eigenvalues().unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
    cc.factor = eig.eigenvectors() * scale.asDiagonal();
    cc.source = k;
    kept += cc.weight;
    out.components.push_back(std::move(cc));
  }
  for (auto& cc : out.components) cc.weight /= kept;
  return out;
}

VectorXd sample_future(const ConditionedMixture& mixture, std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < mixture.components.size(); ++k) {
    u -= mixture.components[k].weight;
    if (u < 0) break;
  }
  const auto& comp = mixture.components[k];
  VectorXd z(comp.factor.cols());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  return comp.mean + comp.factor * z;
}

MatrixXd sample_futures(const ConditionedMixture& mixture, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample size must be at least 1");
  if (mixture.components.empty()) throw InvalidArgument("conditioned mixture is empty");
  MatrixXd out(n, mixture.dim);
  for (std::size_t i = 0; i < n; ++i) out.row(i) = sample_future(mixture, seed, i).transpose();
  return out;
}

}  // namespace shotvalue
