#include "shotvalue/dpgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "shotvalue/error.hpp"
#include "shotvalue/rng.hpp"

namespace shotvalue {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

double digamma(double x) { return boost::math::digamma(x); }

double log_sum_exp(const VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// log of the multivariate gamma normaliser pieces shared by the Wishart terms.
double sum_lgamma_half(double nu, int d) {
  double s = 0.0;
  for (int i = 1; i <= d; ++i) s += std::lgamma(0.5 * (nu + 1 - i));
  return s;
}

double sum_digamma_half(double nu, int d) {
  double s = 0.0;
  for (int i = 1; i <= d; ++i) s += digamma(0.5 * (nu + 1 - i));
  return s;
}

// ln B(W, nu) of the Wishart normaliser, written with Psi = W^{-1}.
double log_wishart_norm(double logdet_psi, double nu, int d) {
  return 0.5 * nu * logdet_psi - 0.5 * nu * d * std::log(2.0) -
         0.25 * d * (d - 1) * std::log(M_PI) - sum_lgamma_half(nu, d);
}

struct Component {
  double n = 0.0;
  VectorXd xbar;
  MatrixXd scatter;  // sum_n r (x - xbar)(x - xbar)'
  double beta = 0.0;
  double nu = 0.0;
  VectorXd m;
  MatrixXd psi;
  MatrixXd chol;  // lower factor of psi
  MatrixXd psi_inv;
  double logdet_psi = 0.0;
  double e_logdet_lambda = 0.0;
};

struct RunResult {
  MatrixXd r;
  std::vector<Component> comps;
  VectorXd g1, g2;
  std::vector<double> trace;
  bool converged = false;
  int iterations = 0;
  double elbo = -std::numeric_limits<double>::infinity();
};

class Vbem {
 public:
  Vbem(const MatrixXd& x, const DpPrior& prior, double jitter)
      : x_(x), prior_(prior), d_(static_cast<int>(x.cols())), jitter_(jitter) {
    Eigen::LLT<MatrixXd> llt(prior_.scale);
    prior_logdet_psi_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    prior_log_norm_ = log_wishart_norm(prior_logdet_psi_, prior_.dof, d_);
  }

  bool jitter_applied() const { return jitter_applied_; }

  RunResult run(MatrixXd r, int max_iterations, double tolerance) {
    RunResult out;
    m_step(r, out);
    double f = elbo(r, out);
    check_finite(f, 0);
    out.trace.push_back(f);
    for (int it = 1; it <= max_iterations; ++it) {
      e_step(r, out);
      m_step(r, out);
      const double next = elbo(r, out);
      check_finite(next, it);
      out.trace.push_back(next);
      out.iterations = it;
      const double change = std::abs(next - f);
      f = next;
      if (change <= tolerance * std::abs(f)) {
        out.converged = true;
        break;
      }
    }
    out.elbo = f;
    out.r = std::move(r);
    return out;
  }

 private:
  static void check_finite(double f, int iteration) {
    if (!std::isfinite(f)) {
      throw NumericError("non-finite ELBO at iteration " + std::to_string(iteration));
    }
  }

  VectorXd expected_log_weights(const RunResult& s) const {
    const int k = static_cast<int>(s.comps.size());
    VectorXd out(k);
    double tail = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j + 1 < k) {
        const double all = digamma(s.g1(j) + s.g2(j));
        out(j) = digamma(s.g1(j)) - all + tail;
        tail += digamma(s.g2(j)) - all;
      } else {
        out(j) = tail;  // last stick is the remainder
      }
    }
    return out;
  }

  void m_step(const MatrixXd& r, RunResult& s) {
    const int k = static_cast<int>(r.cols());
    const auto n = x_.rows();
    s.comps.resize(k);
    for (int j = 0; j < k; ++j) {
      Component& c = s.comps[j];
      c.n = r.col(j).sum();
      if (c.n > 1e-300) {
        c.xbar = x_.transpose() * r.col(j) / c.n;
        MatrixXd centered = x_.rowwise() - c.xbar.transpose();
        MatrixXd weighted = centered.array().colwise() * r.col(j).array();
        c.scatter = centered.transpose() * weighted;
      } else {
        c.n = 0.0;
        c.xbar = prior_.mean;
        c.scatter = MatrixXd::Zero(d_, d_);
      }
      c.beta = prior_.mean_precision + c.n;
      c.nu = prior_.dof + c.n;
      c.m = (prior_.mean_precision * prior_.mean + c.n * c.xbar) / c.beta;
      const VectorXd diff = c.xbar - prior_.mean;
      c.psi = prior_.scale + c.scatter +
              (prior_.mean_precision * c.n / c.beta) * diff * diff.transpose();
      c.psi = 0.5 * (c.psi + c.psi.transpose());
      Eigen::LLT<MatrixXd> llt(c.psi);
      if (llt.info() != Eigen::Success) {
        c.psi.diagonal().array() += jitter_;
        llt.compute(c.psi);
        jitter_applied_ = true;
        if (llt.info() != Eigen::Success) throw NumericError("component scale matrix is not positive definite");
      }
      c.chol = llt.matrixL();
      c.psi_inv = llt.solve(MatrixXd::Identity(d_, d_));
      c.logdet_psi = 2.0 * c.chol.diagonal().array().log().sum();
      c.e_logdet_lambda = sum_digamma_half(c.nu, d_) + d_ * std::log(2.0) - c.logdet_psi;
    }
    (void)n;
    s.g1.resize(k);
    s.g2.resize(k);
    double tail = 0.0;
    for (int j = k - 1; j >= 0; --j) {
      s.g1(j) = 1.0 + s.comps[j].n;
      s.g2(j) = prior_.alpha + tail;
      tail += s.comps[j].n;
    }
  }

  void e_step(MatrixXd& r, const RunResult& s) const {
    const int k = static_cast<int>(s.comps.size());
    const auto n = x_.rows();
    const VectorXd elog_pi = expected_log_weights(s);
    MatrixXd logrho(n, k);
    for (int j = 0; j < k; ++j) {
      const Component& c = s.comps[j];
      MatrixXd centered = (x_.rowwise() - c.m.transpose()).transpose();
      c.chol.triangularView<Eigen::Lower>().solveInPlace(centered);
      const VectorXd quad = centered.colwise().squaredNorm().transpose();
      logrho.col(j) = (elog_pi(j) + 0.5 * c.e_logdet_lambda - 0.5 * d_ * kLog2Pi -
                       0.5 * d_ / c.beta - 0.5 * c.nu * quad.array())
                          .matrix();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const VectorXd row = logrho.row(i).transpose();
      const double lse = log_sum_exp(row);
      r.row(i) = (row.array() - lse).exp().matrix().transpose();
    }
  }

  double elbo(const MatrixXd& r, const RunResult& s) const {
    const int k = static_cast<int>(s.comps.size());
    const double d = d_;
    const double beta0 = prior_.mean_precision;
    const double nu0 = prior_.dof;
    const VectorXd elog_pi = expected_log_weights(s);

    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      const Component& c = s.comps[j];
      const VectorXd dx = c.xbar - c.m;
      const VectorXd dm = c.m - prior_.mean;
      // E[log p(x | z, mu, Lambda)]
      total += 0.5 * (c.n * (c.e_logdet_lambda - d / c.beta - d * kLog2Pi) -
                      c.nu * ((c.psi_inv.cwiseProduct(c.scatter)).sum() +
                              c.n * dx.dot(c.psi_inv * dx)));
      // E[log p(z | v)]
      total += c.n * elog_pi(j);
      // E[log p(mu, Lambda)]
      total += 0.5 * (d * std::log(beta0 / (2.0 * M_PI)) + c.e_logdet_lambda - d * beta0 / c.beta -
                      beta0 * c.nu * dm.dot(c.psi_inv * dm));
      total += prior_log_norm_ + 0.5 * (nu0 - d - 1.0) * c.e_logdet_lambda -
               0.5 * c.nu * (prior_.scale.cwiseProduct(c.psi_inv)).sum();
      // -E[log q(mu, Lambda)]
      const double log_norm = log_wishart_norm(c.logdet_psi, c.nu, d_);
      const double entropy_lambda =
          -log_norm - 0.5 * (c.nu - d - 1.0) * c.e_logdet_lambda + 0.5 * c.nu * d;
      total -= 0.5 * c.e_logdet_lambda + 0.5 * d * std::log(c.beta / (2.0 * M_PI)) - 0.5 * d -
               entropy_lambda;
    }
    // Sticks: E[log p(v)] - E[log q(v)]
    for (int j = 0; j + 1 < k; ++j) {
      const double all = digamma(s.g1(j) + s.g2(j));
      const double elog_v = digamma(s.g1(j)) - all;
      const double elog_1mv = digamma(s.g2(j)) - all;
      total += std::log(prior_.alpha) + (prior_.alpha - 1.0) * elog_1mv;
      const double log_beta_fn =
          std::lgamma(s.g1(j)) + std::lgamma(s.g2(j)) - std::lgamma(s.g1(j) + s.g2(j));
      total -= (s.g1(j) - 1.0) * elog_v + (s.g2(j) - 1.0) * elog_1mv - log_beta_fn;
    }
    // Entropy of q(z)
    double ent = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double p = r.data()[i];
      if (p > 0.0) ent -= p * std::log(p);
    }
    return total + ent;
  }

  const MatrixXd& x_;
  const DpPrior& prior_;
  int d_;
  double jitter_;
  double prior_logdet_psi_ = 0.0;
  double prior_log_norm_ = 0.0;
  bool jitter_applied_ = false;
};

// Columns reordered by decreasing mass: the stick-breaking prior favours
// large components first.
MatrixXd sorted_by_mass(const MatrixXd& r) {
  const VectorXd mass = r.colwise().sum().transpose();
  std::vector<int> order(r.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mass(a) > mass(b); });
  MatrixXd out(r.rows(), r.cols());
  for (std::size_t j = 0; j < order.size(); ++j) out.col(j) = r.col(order[j]);
  return out;
}

// k-means++ seeding followed by a few Lloyd iterations; returns labels.
std::vector<int> kmeans(const MatrixXd& x, int k, Rng& rng, int lloyd_iterations = 10) {
  const auto n = x.rows();
  MatrixXd centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.index(n)));
  VectorXd dist = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= dist(pick);
        if (u <= 0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(n));
    }
    centers.row(c) = x.row(pick);
    dist = dist.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  std::vector<int> labels(n, 0);
  for (int it = 0; it <= lloyd_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      labels[i] = static_cast<int>(best);
    }
    if (it == lloyd_iterations) break;
    MatrixXd sums = MatrixXd::Zero(k, x.cols());
    VectorXd counts = VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += x.row(i);
      counts(labels[i]) += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
    }
  }
  return labels;
}

std::vector<int> argmax_labels(const MatrixXd& r) {
  std::vector<int> labels(r.rows());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    Eigen::Index best;
    r.row(i).maxCoeff(&best);
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

// Moves the second half of a 2-means split of component k into a new column.
std::optional<MatrixXd> split_component(const MatrixXd& x, const MatrixXd& r, int k, Rng& rng,
                                        int min_points) {
  const auto labels = argmax_labels(r);
  std::vector<Eigen::Index> members;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (labels[i] == k) members.push_back(i);
  }
  if (static_cast<int>(members.size()) < 2 * min_points) return std::nullopt;
  MatrixXd sub(members.size(), x.cols());
  for (std::size_t i = 0; i < members.size(); ++i) sub.row(i) = x.row(members[i]);
  const auto halves = kmeans(sub, 2, rng);
  const auto second = std::count(halves.begin(), halves.end(), 1);
  if (second < min_points || static_cast<long>(members.size()) - second < min_points) {
    return std::nullopt;
  }
  MatrixXd out(r.rows(), r.cols() + 1);
  out.leftCols(r.cols()) = r;
  out.col(r.cols()).setZero();
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (halves[i] == 1) {
      out(members[i], r.cols()) = r(members[i], k);
      out(members[i], k) = 0.0;
    }
  }
  return out;
}

RunResult fit_restart_split(Vbem& vbem, const MatrixXd& x, const FitConfig& config, Rng& rng,
                            std::vector<double>& search_trace) {
  const int min_points = std::max(2, static_cast<int>(x.cols()) / 4);
  RunResult best = vbem.run(MatrixXd::Ones(x.rows(), 1), config.max_iterations, config.tolerance);
  search_trace.push_back(best.elbo);
  while (best.r.cols() < config.truncation) {
    const VectorXd mass = best.r.colwise().sum().transpose();
    std::vector<int> order(mass.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mass(a) > mass(b); });
    bool accepted = false;
    for (int k : order) {
      auto start = split_component(x, best.r, k, rng, min_points);
      if (!start) continue;
      RunResult trial = vbem.run(sorted_by_mass(*start), config.max_iterations, config.tolerance);
      if (trial.elbo > best.elbo + config.tolerance * std::abs(best.elbo)) {
        best = std::move(trial);
        search_trace.push_back(best.elbo);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return best;
}

RunResult fit_restart_kmeanspp(Vbem& vbem, const MatrixXd& x, const FitConfig& config, Rng& rng,
                               std::vector<double>& search_trace) {
  const int k = static_cast<int>(std::min<Eigen::Index>(config.truncation, x.rows()));
  const auto labels = kmeans(x, k, rng);
  MatrixXd r = MatrixXd::Zero(x.rows(), k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) r(i, labels[i]) = 1.0;
  RunResult out = vbem.run(sorted_by_mass(r), config.max_iterations, config.tolerance);
  search_trace.push_back(out.elbo);
  return out;
}

}  // namespace

DpPrior DpPrior::weakly_informative(const MatrixXd& data, double alpha) {
  if (data.rows() < 2) throw InvalidArgument("need at least two rows for an empirical prior");
  DpPrior p;
  p.alpha = alpha;
  p.mean = data.colwise().mean().transpose();
  p.mean_precision = 1.0;
  p.dof = static_cast<double>(data.cols()) + 2.0;
  const MatrixXd centered = data.rowwise() - p.mean.transpose();
  const VectorXd var = centered.colwise().squaredNorm().transpose() / static_cast<double>(data.rows() - 1);
  p.scale = var.asDiagonal();
  return p;
}

void DpPrior::validate() const {
  const int d = dim();
  if (!(alpha > 0)) throw InvalidArgument("concentration must be positive");
  if (!(mean_precision > 0)) throw InvalidArgument("mean precision must be positive");
  if (!(dof > d - 1)) throw InvalidArgument("degrees of freedom must exceed dim - 1");
  if (scale.rows() != d || scale.cols() != d) throw InvalidArgument("prior scale has wrong shape");
  if (!scale.isApprox(scale.transpose(), 1e-12)) throw InvalidArgument("prior scale is not symmetric");
}

void FitConfig::validate() const {
  if (truncation < 1) throw InvalidArgument("truncation must be at least 1");
  if (!(tolerance > 0)) throw InvalidArgument("tolerance must be positive");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
  if (restarts < 1) throw InvalidArgument("restarts must be at least 1");
  if (jitter < 0) throw InvalidArgument("jitter must be non-negative");
}

MixtureModel::MixtureModel(std::vector<MixtureComponent> components,
                           std::vector<std::string> feature_names, std::optional<DpPrior> prior)
    : components_(std::move(components)), names_(std::move(feature_names)), prior_(std::move(prior)) {
  if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ == 0) throw InvalidArgument("mixture dimension must be positive");
  if (!names_.empty() && static_cast<int>(names_.size()) != dim_) {
    throw InvalidArgument("feature names do not match the mixture dimension");
  }
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_ || c.covariance.rows() != dim_ || c.covariance.cols() != dim_) {
      throw InvalidArgument("component shapes are inconsistent");
    }
    if (!(c.weight > 0.0)) throw InvalidArgument("component weights must be positive");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("component weights must sum to one");
  for (auto& c : components_) {
    c.weight /= total;
    c.covariance = 0.5 * (c.covariance + c.covariance.transpose());
    Eigen::LLT<MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) throw NumericError("component covariance is not positive definite");
    chol_.push_back(llt.matrixL());
    log_det_.push_back(2.0 * chol_.back().diagonal().array().log().sum());
  }
}

VectorXd MixtureModel::weights() const {
  VectorXd w(size());
  for (int k = 0; k < size(); ++k) w(k) = components_[k].weight;
  return w;
}

VectorXd MixtureModel::mean() const {
  VectorXd m = VectorXd::Zero(dim_);
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double gaussian_log_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& chol_lower,
                            double log_det) {
  const VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det + z.squaredNorm());
}

double log_density(const MixtureModel& model, const VectorXd& point) {
  if (point.size() != model.dim()) {
    throw InvalidArgument("point has dimension " + std::to_string(point.size()) + ", model " +
                          std::to_string(model.dim()));
  }
  VectorXd terms(model.size());
  for (int k = 0; k < model.size(); ++k) {
    const auto& c = model.component(k);
    terms(k) = std::log(c.weight) + gaussian_log_density(point, c.mean, model.cholesky(k), model.log_det(k));
  }
  return log_sum_exp(terms);
}

MatrixXd sample(const MixtureModel& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample size must be at least 1");
  Rng rng(seed);
  MatrixXd out(n, model.dim());
  VectorXd z(model.dim());
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    int k = 0;
    for (; k + 1 < model.size(); ++k) {
      u -= model.component(k).weight;
      if (u < 0) break;
    }
    for (int j = 0; j < model.dim(); ++j) z(j) = rng.normal();
    out.row(i) = (model.component(k).mean + model.cholesky(k) * z).transpose();
  }
  return out;
}

double holdout_loglik(const MixtureModel& model, const MatrixXd& heldout) {
  if (heldout.rows() == 0) throw InvalidArgument("held-out set is empty");
  if (heldout.cols() != model.dim()) throw InvalidArgument("held-out dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < heldout.rows(); ++i) total += log_density(model, heldout.row(i).transpose());
  return total / static_cast<double>(heldout.rows());
}

FitResult fit_dpgmm(const MatrixXd& data, const DpPrior& prior_in, const FitConfig& config) {
  config.validate();
  prior_in.validate();
  const auto n = data.rows();
  const auto d = data.cols();
  if (d != prior_in.dim()) throw InvalidArgument("prior dimension does not match data");
  if (n <= d) throw InvalidArgument("need more rows than columns to fit a full-covariance mixture");
  if (!data.allFinite()) throw InvalidArgument("data contains non-finite entries");

  DpPrior prior = prior_in;
  const double mean_diag = prior.scale.diagonal().mean();
  const double jitter = config.jitter * (mean_diag > 0 ? mean_diag : 1.0);
  bool jittered = false;
  {
    Eigen::LLT<MatrixXd> llt(prior.scale);
    if (llt.info() != Eigen::Success) {
      if (jitter <= 0) throw NumericError("singular empirical covariance without jitter");
      prior.scale.diagonal().array() += jitter;
      jittered = true;
      llt.compute(prior.scale);
      if (llt.info() != Eigen::Success) throw NumericError("prior scale is not positive definite");
    }
  }

  Vbem vbem(data, prior, jitter);
  FitReport report;
  std::optional<RunResult> best;
  std::vector<double> best_search;
  for (int restart = 0; restart < config.restarts; ++restart) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(restart)));
    std::vector<double> search;
    RunResult run = config.init == InitStrategy::split
                        ? fit_restart_split(vbem, data, config, rng, search)
                        : fit_restart_kmeanspp(vbem, data, config, rng, search);
    report.restart_elbos.push_back(run.elbo);
    if (!best || run.elbo > best->elbo) {
      best = std::move(run);
      best_search = std::move(search);
    }
  }

  // Posterior-mean point estimates.
  const int k = static_cast<int>(best->comps.size());
  std::vector<double> weights(k);
  double remaining = 1.0;
  for (int j = 0; j < k; ++j) {
    const double ev = j + 1 < k ? best->g1(j) / (best->g1(j) + best->g2(j)) : 1.0;
    weights[j] = remaining * ev;
    remaining *= 1.0 - ev;
  }
  std::vector<MixtureComponent> comps;
  std::vector<int> kept;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (int j = 0; j < k; ++j) {
    if (weights[j] / total < config.prune_threshold) continue;
    const auto& c = best->comps[j];
    comps.push_back({weights[j], c.m, c.psi / (c.nu - static_cast<double>(d) - 1.0)});
    kept.push_back(j);
  }
  double kept_total = 0.0;
  for (const auto& c : comps) kept_total += c.weight;
  for (auto& c : comps) c.weight /= kept_total;

  FitResult result;
  result.model = MixtureModel(std::move(comps), {}, prior_in);
  result.responsibilities.resize(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) result.responsibilities.col(j) = best->r.col(kept[j]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = result.responsibilities.row(i).sum();
    if (s > 0) result.responsibilities.row(i) /= s;
    else result.responsibilities.row(i).setConstant(1.0 / static_cast<double>(kept.size()));
  }
  report.elbo_trace = best->trace;
  report.search_trace = std::move(best_search);
  report.converged = best->converged;
  report.iterations = best->iterations;
  report.effective_components = static_cast<int>(kept.size());
  report.jitter_applied = jittered || vbem.jitter_applied();
  result.report = std::move(report);
  return result;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InvalidArgument("label vectors differ in length");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1) / 2.0; };
  double sum_joint = 0, sum_a = 0, sum_b = 0;
  for (const auto& [_, c] : joint) sum_joint += choose2(c);
  for (const auto& [_, c] : ra) sum_a += choose2(c);
  for (const auto& [_, c] : rb) sum_b += choose2(c);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

}  // namespace shotvalue
