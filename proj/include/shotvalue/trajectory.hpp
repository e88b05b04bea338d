#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "shotvalue/polynomial.hpp"
#include "shotvalue/tracking.hpp"

namespace shotvalue {

enum class Axis { x = 0, y = 1, z = 2 };

// Named positions of the functional encoding vector.
//
// One-bounce (33): arc-1 ball cubic x,y,z (12) | arc-2 ball cubic x,y,z (12) |
//   exit_duration | shooter x,y line (4) | receiver x,y line (4)
// No-bounce (21): arc-1 ball cubic x,y,z (12) | total_duration |
//   shooter x,y line (4) | receiver x,y line (4)
//
// Arc-1 and player times start at impact; arc-2 time starts at the bounce.
class EncodingLayout {
 public:
  static const EncodingLayout& for_flag(BounceFlag flag);

  BounceFlag flag() const { return flag_; }
  int dim() const { return static_cast<int>(names_.size()); }
  int arcs() const { return flag_ == BounceFlag::one_bounce ? 2 : 1; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<int> index_of(std::string_view name) const;

  // arc is 0 or 1, power 0..3.
  int ball(int arc, Axis axis, int power) const { return arc * 12 + static_cast<int>(axis) * 4 + power; }
  int duration() const { return duration_; }
  // coefficient 0 is the intercept, 1 the slope; axis is x or y.
  int shooter(Axis axis, int coefficient) const { return shooter_ + static_cast<int>(axis) * 2 + coefficient; }
  int receiver(Axis axis, int coefficient) const { return receiver_ + static_cast<int>(axis) * 2 + coefficient; }

  // Shooter/ball block and receiver block; disjoint and covering.
  const std::vector<int>& shooter_set() const { return shooter_set_; }
  const std::vector<int>& receiver_set() const { return receiver_set_; }
  // Unit-row features held fixed for Shot IQ (player impact positions). The
  // bounce location is added as polynomial rows at evaluation time.
  const std::vector<int>& shot_iq_fixed() const { return shot_iq_fixed_; }

 private:
  explicit EncodingLayout(BounceFlag flag);

  BounceFlag flag_;
  int duration_ = 0;
  int shooter_ = 0;
  int receiver_ = 0;
  std::vector<std::string> names_;
  std::vector<int> shooter_set_;
  std::vector<int> receiver_set_;
  std::vector<int> shot_iq_fixed_;
};

struct FunctionalEncoding {
  BounceFlag flag = BounceFlag::one_bounce;
  Eigen::VectorXd values;

  FunctionalEncoding() = default;
  FunctionalEncoding(BounceFlag f, Eigen::VectorXd v);

  const EncodingLayout& layout() const { return EncodingLayout::for_flag(flag); }
  Cubic ball(int arc, Axis axis) const;
  Cubic shooter(Axis axis) const;
  Cubic receiver(Axis axis) const;
  // exit_duration for one-bounce shots, total_duration otherwise.
  double duration_value() const { return values(layout().duration()); }
};

struct FitDiagnostics {
  std::array<double, 3> arc1_rmse{};
  std::array<double, 3> arc2_rmse{};
  std::array<double, 2> shooter_rmse{};
  std::array<double, 2> receiver_rmse{};
  std::size_t arc1_samples = 0;
  std::size_t arc2_samples = 0;
  std::size_t shooter_samples = 0;
  std::size_t receiver_samples = 0;
  double bounce_time = 0.0;
};

struct TrajectoryConfig {
  double bounce_threshold = 0.15;
  // Upper end of the window searched for the arc-1 ground contact.
  double root_horizon = 5.0;
  double player_speed_cap = 12.0;
};

struct BounceSplit {
  std::size_t index = 0;  // sample index of the earliest z-minimum below threshold
  double time = 0.0;
};

// Throws GeometryError("no bounce found") when no sample dips below the
// threshold.
BounceSplit detect_bounce(std::span<const TrackingSample> ball, double threshold = 0.15);

struct EncodedShot {
  FunctionalEncoding encoding;
  FitDiagnostics diagnostics;
};

// Requires a canonical record with at least four ball samples per arc and two
// samples per player.
EncodedShot encode(const ShotRecord& record, const TrajectoryConfig& config = {});

struct BouncePoint {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;  // arc-1 duration, seconds since impact
};

// Earliest ground contact of the arc-1 z polynomial in (0, horizon].
BouncePoint bounce_location(const FunctionalEncoding& enc, double horizon = 5.0);

// Impact to end of shot.
double shot_duration(const FunctionalEncoding& enc, double horizon = 5.0);

struct ShotState {
  Eigen::Vector3d ball;
  Eigen::Vector2d shooter;
  Eigen::Vector2d receiver;
};

// Position of ball and players at t seconds after impact.
ShotState evaluate(const FunctionalEncoding& enc, double t, double horizon = 5.0);

}  // namespace shotvalue
