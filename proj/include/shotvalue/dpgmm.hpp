#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace shotvalue {

// Stick-breaking concentration plus a Normal-Wishart base measure. scale is
// the inverse-Wishart scale matrix of the component covariance, so the
// prior expected covariance is scale / (dof - dim - 1).
struct DpPrior {
  double alpha = 1.0;
  Eigen::VectorXd mean;
  double mean_precision = 1.0;
  double dof = 0.0;
  Eigen::MatrixXd scale;

  // alpha = 1, mean = column means, mean_precision = 1, dof = d + 2,
  // scale = diag(column variances).
  static DpPrior weakly_informative(const Eigen::MatrixXd& data, double alpha = 1.0);
  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

struct MixtureComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Immutable Gaussian mixture with cached Cholesky factors.
class MixtureModel {
 public:
  MixtureModel() = default;
  // Weights must be positive and sum to one within 1e-9; they are
  // renormalized exactly. Every covariance must admit a Cholesky factor.
  MixtureModel(std::vector<MixtureComponent> components, std::vector<std::string> feature_names = {},
               std::optional<DpPrior> prior = std::nullopt);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(components_.size()); }
  const std::vector<MixtureComponent>& components() const { return components_; }
  const MixtureComponent& component(int k) const { return components_[k]; }
  const Eigen::MatrixXd& cholesky(int k) const { return chol_[k]; }
  double log_det(int k) const { return log_det_[k]; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::optional<DpPrior>& prior() const { return prior_; }

  Eigen::VectorXd weights() const;
  Eigen::VectorXd mean() const;

 private:
  int dim_ = 0;
  std::vector<MixtureComponent> components_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> log_det_;
  std::vector<std::string> names_;
  std::optional<DpPrior> prior_;
};

// log N(x; mean, L L').
double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& chol_lower, double log_det);

double log_density(const MixtureModel& model, const Eigen::VectorXd& point);
Eigen::MatrixXd sample(const MixtureModel& model, std::size_t n, std::uint64_t seed);
double holdout_loglik(const MixtureModel& model, const Eigen::MatrixXd& heldout);

enum class InitStrategy {
  // Grow from one component by accepted two-way splits seeded with k-means++.
  split,
  // k-means++ on the full truncation, hard responsibilities.
  kmeanspp,
};

struct FitConfig {
  int truncation = 20;
  int max_iterations = 500;
  double tolerance = 1e-8;  // relative ELBO change
  int restarts = 3;
  double jitter = 1e-6;  // times the mean prior scale diagonal
  std::uint64_t seed = 0;
  InitStrategy init = InitStrategy::split;
  double prune_threshold = 1e-5;

  void validate() const;
};

struct FitReport {
  std::vector<double> elbo_trace;  // final coordinate-ascent run of the winning restart
  std::vector<double> search_trace;  // accepted ELBO after each growth stage
  std::vector<double> restart_elbos;
  bool converged = false;
  int iterations = 0;
  int effective_components = 0;
  bool jitter_applied = false;
  std::optional<double> heldout_loglik;
};

struct FitResult {
  MixtureModel model;
  FitReport report;
  // n x K responsibilities for the surviving components (rows sum to one).
  Eigen::MatrixXd responsibilities;
};

// Mean-field variational inference for the truncated stick-breaking
// Gaussian mixture.
FitResult fit_dpgmm(const Eigen::MatrixXd& data, const DpPrior& prior, const FitConfig& config);

// Adjusted Rand index between two labelings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace shotvalue
