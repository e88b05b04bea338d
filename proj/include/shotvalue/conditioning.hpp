#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shotvalue/dpgmm.hpp"
#include "shotvalue/trajectory.hpp"

namespace shotvalue {

inline constexpr double kDefaultObservationNoise = 1e-4;  // m^2

// c . A = value + noise, noise ~ N(0, noise_var).
struct LinearConstraint {
  Eigen::VectorXd row;
  double value = 0.0;
  double noise_var = 0.0;
};

class ObservationSet {
 public:
  ObservationSet() = default;
  explicit ObservationSet(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return constraints_.size(); }
  bool empty() const { return constraints_.empty(); }
  const std::vector<LinearConstraint>& constraints() const { return constraints_; }

  // Rejects rows of the wrong length, all-zero rows and negative or
  // non-finite noise.
  void add(LinearConstraint c);
  void add_unit(int index, double value, double noise_var = 0.0);

  Eigen::MatrixXd matrix() const;  // m x d
  Eigen::VectorXd values() const;
  Eigen::VectorXd noise() const;

 private:
  int dim_ = 0;
  std::vector<LinearConstraint> constraints_;
};

enum class ObservationKind { ball, shooter, receiver, feature };

std::string_view to_string(ObservationKind k);
ObservationKind parse_observation_kind(std::string_view s);

// A timestamped coordinate. For ball and player kinds dim is the axis
// (0 = x, 1 = y, 2 = z; players have no z). For the feature kind dim is the
// encoding index and t is ignored.
struct Observation {
  ObservationKind kind = ObservationKind::ball;
  double t = 0.0;
  int dim = 0;
  double value = 0.0;
  double noise_var = kDefaultObservationNoise;
};

// Ball samples at t <= bounce_time_hint go to arc 1, later ones to arc 2 on
// time rebased to the hint. Without a hint every ball sample is attributed to
// arc 1. Observations after shot_end are rejected.
ObservationSet constraints_from_observations(const std::vector<Observation>& observations,
                                             const EncodingLayout& layout,
                                             std::optional<double> bounce_time_hint = std::nullopt,
                                             std::optional<double> shot_end = std::nullopt);

// CSV with header kind,t,dim,value,noise_var. dim is x|y|z for ball and
// player rows, and a feature name or index for feature rows. An empty
// noise_var means the default.
std::vector<Observation> read_observations_csv(std::istream& in, const EncodingLayout& layout);
void write_observations_csv(std::ostream& out, const std::vector<Observation>& observations,
                            const EncodingLayout& layout);

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Throws NumericError when the constraint Gram matrix is singular.
GaussianConditional condition_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                       const Eigen::MatrixXd& c, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& noise);

// Posterior component probabilities given the constraints.
Eigen::VectorXd update_weights(const MixtureModel& model, const ObservationSet& observations);

struct ConditionedComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd factor;  // factor * factor' = covariance, eigenvalues clamped at zero
  int source = 0;          // index in the unconditioned model
};

struct ConditionedMixture {
  std::vector<ConditionedComponent> components;
  int dim = 0;
  std::size_t constraint_count = 0;

  Eigen::VectorXd weights() const;
  Eigen::VectorXd mean() const;
};

ConditionedMixture condition_mixture(const MixtureModel& model, const ObservationSet& observations,
                                     double prune_threshold = 1e-8);

// Future i is drawn from its own substream derive_seed(seed, i), so any
// prefix of the output does not depend on n.
Eigen::MatrixXd sample_futures(const ConditionedMixture& mixture, std::size_t n, std::uint64_t seed);
Eigen::VectorXd sample_future(const ConditionedMixture& mixture, std::uint64_t seed, std::size_t index);

}  // namespace shotvalue
