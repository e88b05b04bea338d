#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shotvalue/tracking.hpp"

namespace shotvalue {

// Shooter win probability on the logit scale:
//   intercept + impact_speed * (speed - 30) / 10 + required_speed * v_req
//   + abs_bounce_x * |bounce_x| + bounce_y * bounce_y
// evaluated on ground-truth quantities.
struct TruthRule {
  double intercept = -2.2;
  double impact_speed = 0.4;
  double required_speed = 0.6;
  double abs_bounce_x = 0.25;
  double bounce_y = 0.05;

  bool operator==(const TruthRule&) const = default;
};

enum class Archetype { anticipator, average, flat_footed };
std::string_view to_string(Archetype a);
Archetype parse_archetype(std::string_view s);

struct SynthConfig {
  double gravity = 9.81;
  double restitution = 0.75;
  double sample_rate = 50.0;  // Hz
  double noise_sd = 0.02;     // m
  CourtGeometry geometry;

  std::array<double, 3> shot_type_mix{0.3, 0.2, 0.5};  // serve, serve_return, rally
  double no_bounce_fraction = 0.12;
  double flip_fraction = 0.5;  // shots recorded with the shooter at y > 0

  // Arc-1 flight times, seconds.
  double serve_flight_min = 0.42;
  double serve_flight_max = 0.70;
  double rally_flight_min = 0.80;
  double rally_flight_max = 1.50;
  // Target spread past the lines; larger values give more errors.
  double target_margin = 0.6;

  std::array<double, 3> archetype_mix{1.0 / 3, 1.0 / 3, 1.0 / 3};  // anticipator, average, flat_footed
  double anticipator_spread = 0.3;  // m around the good position
  double flat_footed_depth = 2.0;   // m behind the baseline

  TruthRule rule;
  std::uint64_t seed = 0;

  // Throws InvalidArgument for out-of-range values or launch ranges in which
  // no ball can clear the net.
  void validate() const;
};

// Ground-truth physics of one shot in the canonical frame (shooter at y < 0).
struct SynthTruth {
  Eigen::Vector3d launch_position;
  Eigen::Vector3d launch_velocity;
  double arc1_duration = 0.0;  // bounce time, or total duration without a bounce
  Eigen::Vector3d bounce_velocity;  // just after the bounce
  double exit_duration = 0.0;  // 0 without a bounce
  Eigen::Vector2d shooter_start, shooter_velocity;
  Eigen::Vector2d receiver_start, receiver_velocity;
  Eigen::Vector2d good_position;
  double good_time = 0.0;  // since impact
  double bounce_x = 0.0;   // ball at the end of arc 1
  double bounce_y = 0.0;
  bool error = false;
  bool flipped = false;  // record stored with y negated
};

struct SynthShot {
  ShotRecord record;
  SynthTruth truth;
  Archetype archetype = Archetype::average;  // receiver
  double true_p = 0.0;
};

// Deterministic given (config, n, seed); shot i only depends on its own
// substream.
std::vector<SynthShot> generate_corpus(const SynthConfig& config, std::size_t n, std::uint64_t seed);

// Zero for error shots, otherwise the logistic rule on ground-truth features.
double true_win_prob(const SynthConfig& config, const SynthShot& shot);

// Canonical-frame ball position at t seconds after impact.
Eigen::Vector3d true_ball_position(const SynthConfig& config, const SynthTruth& truth, double t);

// shot_id,true_p,true_bounce_x,true_bounce_y,archetype. Bounce coordinates
// are in the frame of the recorded data.
void write_truth_csv(std::ostream& out, const std::vector<SynthShot>& shots);

}  // namespace shotvalue
