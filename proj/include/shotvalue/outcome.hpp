#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shotvalue/bspline.hpp"
#include "shotvalue/tracking.hpp"
#include "shotvalue/trajectory.hpp"

namespace shotvalue {

struct GoodPosition {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;        // seconds since impact
  bool fallback = false;  // apex used because the ball never reached 1 m
};

// Where the ball first reaches 1 m after the bounce, searched over the
// second arc (0, exit_duration]. Falls back to the highest point of the
// second arc. Throws GeometryError for no-bounce encodings or a
// non-positive exit duration.
GoodPosition good_position(const FunctionalEncoding& enc, double horizon = 5.0);

// Serves must land in the box diagonally opposite the server; every other
// shot in the singles court beyond the net. A net crossing below the
// centre net height is an error. A first arc that never crosses the net
// plane is an error. No-bounce encodings are never errors.
bool classify_error(const FunctionalEncoding& enc, ShotType shot_type, const CourtGeometry& geometry,
                    double horizon = 5.0);

struct ShotFeatures {
  double impact_speed = 0.0;   // m/s
  double bounce_speed = 0.0;   // m/s, into the bounce (end of shot without one)
  double net_height = 0.0;     // ball z where arc 1 crosses y = 0
  double bounce_x = 0.0;
  double bounce_y = 0.0;
  double receiver_x = 0.0;     // at impact
  double receiver_y = 0.0;
  bool receiver_left = false;
  double distance_to_good = 0.0;
  double required_speed = 0.0;  // distance_to_good / time to the good position
  bool one_bounce = true;
  ShotType shot_type = ShotType::rally;
  GoodPosition good;
};

// Throws GeometryError when arc 1 never crosses the net plane; such shots are
// error-class.
ShotFeatures extract_features(const FunctionalEncoding& enc, Handedness receiver_hand, ShotType shot_type,
                              double horizon = 5.0);

// Classifier inputs in a fixed order, see outcome_feature_names().
const std::vector<std::string>& outcome_feature_names();
Eigen::VectorXd feature_vector(const ShotFeatures& f);

enum class TermKind { linear, smooth, tensor };

// One additive term. smooth uses bases[0] on features[0]; tensor uses the
// product of bases[0] and bases[1] on features[0], features[1].
struct Term {
  TermKind kind = TermKind::linear;
  std::vector<int> features;
  std::vector<BSplineBasis> bases;
  int group = 0;  // penalty group: 0 unpenalized, 1 univariate, 2 spatial
  int size() const;
};

struct TermSpec {
  TermKind kind = TermKind::linear;
  std::vector<std::string> features;
};

struct CalibrationBin {
  double lower = 0.0;  // predicted-probability range covered by the bin
  double upper = 0.0;
  std::size_t count = 0;
  double mean_predicted = 0.0;
  double observed = 0.0;
};

struct LambdaScore {
  std::array<double, 2> lambda{};
  double validation_log_loss = 0.0;
};

struct TrainReport {
  std::size_t rows = 0;
  double log_loss = 0.0;
  double win_precision = 0.0;
  double win_recall = 0.0;
  double in_play_precision = 0.0;
  double in_play_recall = 0.0;
  std::vector<CalibrationBin> calibration;
  std::vector<LambdaScore> grid;
};

class OutcomeModel {
 public:
  OutcomeModel() = default;
  OutcomeModel(std::vector<std::string> feature_names, std::vector<Term> terms, Eigen::VectorXd coefficients,
               std::array<double, 2> lambda);

  // Zero coefficients over the given terms.
  static OutcomeModel zero(std::vector<std::string> feature_names, std::vector<Term> terms);

  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<Term>& terms() const { return terms_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }
  const std::array<double, 2>& lambda() const { return lambda_; }
  int design_size() const;

  // Intercept column first, then each term's columns.
  void design_row(const Eigen::VectorXd& features, double* out) const;
  double linear_predictor(const Eigen::VectorXd& features) const;

 private:
  std::vector<std::string> names_;
  std::vector<Term> terms_;
  Eigen::VectorXd coef_;
  std::array<double, 2> lambda_{};
};

double predict_win(const OutcomeModel& model, const Eigen::VectorXd& features);
double predict_win(const OutcomeModel& model, const ShotFeatures& features);

struct OutcomeConfig {
  std::vector<TermSpec> terms;  // empty means default_terms()
  int spline_interior_knots = 8;
  int tensor_basis_size = 6;
  std::vector<double> lambda_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  int max_iterations = 100;
  double tolerance = 1e-10;

  void validate() const;
};

// Smooths on the continuous features, a tensor smooth on bounce (x, y) and
// linear terms for the binary ones.
std::vector<TermSpec> default_terms();

struct OutcomeFit {
  OutcomeModel model;
  TrainReport report;  // metrics on the internal validation split
  Eigen::VectorXd fitted;  // final-model probabilities for the input rows, input order
};

inline constexpr std::size_t kMinOutcomeRows = 200;

// labels: 1 win, 0 in play. Rows are put into a canonical order before
// fitting so the result does not depend on input order. Needs at least
// kMinOutcomeRows rows.
OutcomeFit fit_outcome(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const std::vector<std::string>& feature_names, const OutcomeConfig& config = {});

// Log-loss, precision/recall at 0.5 and equal-count decile calibration.
TrainReport evaluate(const Eigen::VectorXd& predicted, const std::vector<int>& labels);

}  // namespace shotvalue
