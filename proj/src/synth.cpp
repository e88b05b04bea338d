#include "shotvalue/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "shotvalue/error.hpp"
#include "shotvalue/rng.hpp"

namespace shotvalue {

using Eigen::Vector2d;
using Eigen::Vector3d;

std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::anticipator: return "anticipator";
    case Archetype::average: return "average";
    case Archetype::flat_footed: return "flat_footed";
  }
  return "?";
}

Archetype parse_archetype(std::string_view s) {
  if (s == "anticipator") return Archetype::anticipator;
  if (s == "average") return Archetype::average;
  if (s == "flat_footed") return Archetype::flat_footed;
  throw ParseError("unknown archetype '" + std::string(s) + "'");
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Handedness hand_of(Archetype a) { return a == Archetype::average ? Handedness::left : Handedness::right; }

int pick(Rng& rng, const std::array<double, 3>& mix) {
  const double total = mix[0] + mix[1] + mix[2];
  double u = rng.uniform() * total;
  for (int i = 0; i < 2; ++i) {
    if (u < mix[i]) return i;
    u -= mix[i];
  }
  return 2;
}

// Height at which a ball launched from p0 to land at (bx, by) after t1 seconds
// crosses y = 0.
double net_clearance(const Vector3d& p0, double bx, double by, double t1, double g) {
  (void)bx;
  const double vy = (by - p0.y()) / t1;
  const double vz = (-p0.z() + 0.5 * g * t1 * t1) / t1;
  const double tn = -p0.y() / vy;
  return p0.z() + vz * tn - 0.5 * g * tn * tn;
}

Vector2d cap_speed(Vector2d v, double cap) {
  const double s = v.norm();
  return s > cap ? Vector2d(v * (cap / s)) : v;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(gravity > 0)) throw InvalidArgument("gravity must be positive");
  if (!(restitution > 0 && restitution < 1)) throw InvalidArgument("restitution must lie in (0, 1)");
  if (!(sample_rate >= 20)) throw InvalidArgument("sampling rate must be at least 20 Hz");
  if (!(noise_sd >= 0)) throw InvalidArgument("noise sd must be non-negative");
  geometry.validate();
  for (const auto* mix : {&shot_type_mix, &archetype_mix}) {
    if (std::any_of(mix->begin(), mix->end(), [](double v) { return !(v >= 0); }) ||
        !((*mix)[0] + (*mix)[1] + (*mix)[2] > 0)) {
      throw InvalidArgument("mixing proportions must be non-negative with a positive sum");
    }
  }
  for (double f : {no_bounce_fraction, flip_fraction}) {
    if (!(f >= 0 && f <= 1)) throw InvalidArgument("fractions must lie in [0, 1]");
  }
  if (!(serve_flight_min > 0 && serve_flight_max >= serve_flight_min && rally_flight_min > 0 &&
        rally_flight_max >= rally_flight_min)) {
    throw InvalidArgument("flight-time ranges must be positive and ordered");
  }
  if (!(target_margin >= 0) || !(anticipator_spread >= 0) || !(flat_footed_depth >= 0)) {
    throw InvalidArgument("spreads must be non-negative");
  }
  const double l = geometry.court_half_length;
  const double net = geometry.net_height_center;
  // Most favourable launches: highest contact, longest flight, deepest target.
  if (net_clearance({0.0, -l, 3.0}, 0.0, geometry.service_line_distance, serve_flight_max, gravity) < net) {
    throw InvalidArgument("infeasible serve launch range: no serve can clear the net");
  }
  if (net_clearance({0.0, -(l - 1.5), 1.3}, 0.0, l, rally_flight_max, gravity) < net) {
    throw InvalidArgument("infeasible rally launch range: no shot can clear the net");
  }
}

Vector3d true_ball_position(const SynthConfig& config, const SynthTruth& truth, double t) {
  const double g = config.gravity;
  if (t <= truth.arc1_duration || truth.exit_duration == 0.0) {
    Vector3d p = truth.launch_position + truth.launch_velocity * t;
    p.z() -= 0.5 * g * t * t;
    return p;
  }
  const double t1 = truth.arc1_duration;
  Vector3d bounce = truth.launch_position + truth.launch_velocity * t1;
  bounce.z() = 0.0;
  const double s = t - t1;
  Vector3d p = bounce + truth.bounce_velocity * s;
  p.z() -= 0.5 * g * s * s;
  return p;
}

namespace {

SynthShot generate_one(const SynthConfig& cfg, std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  const double g = cfg.gravity;
  const double l = cfg.geometry.court_half_length;
  const double w = cfg.geometry.singles_half_width;
  const double svc = cfg.geometry.service_line_distance;
  const double m = cfg.target_margin;

  SynthShot shot;
  ShotRecord& rec = shot.record;
  SynthTruth& tr = shot.truth;
  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", index + 1);
  rec.shot_id = id;
  rec.shot_type = static_cast<ShotType>(pick(rng, cfg.shot_type_mix));
  const bool want_no_bounce = rng.uniform() < cfg.no_bounce_fraction;
  const auto shooter_arch = static_cast<Archetype>(pick(rng, cfg.archetype_mix));
  shot.archetype = static_cast<Archetype>(pick(rng, cfg.archetype_mix));
  rec.shooter_meta = {std::string(to_string(shooter_arch)), hand_of(shooter_arch)};
  rec.receiver_meta = {std::string(to_string(shot.archetype)), hand_of(shot.archetype)};

  // Launch and target.
  const bool serve = rec.shot_type == ShotType::serve;
  Vector3d p0;
  double bx, by, t1;
  auto draw_launch = [&]() {
    if (serve) {
      const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
      p0 = {side * rng.uniform(0.2, 1.5), -(l + rng.uniform(0.0, 0.3)), rng.uniform(2.5, 3.0)};
      // Box diagonally opposite the server.
      const double lo = side > 0 ? -w : 0.0, hi = side > 0 ? 0.0 : w;
      bx = rng.uniform(lo - m, hi + m);
      by = rng.uniform(1.0, svc + m);
      t1 = rng.uniform(cfg.serve_flight_min, cfg.serve_flight_max);
    } else {
      p0 = {rng.uniform(-w + 0.3, w - 0.3), -rng.uniform(l - 1.5, l + 2.0), rng.uniform(0.5, 1.3)};
      bx = rng.uniform(-w - m, w + m);
      by = rng.uniform(2.0, l + m);
      t1 = rng.uniform(cfg.rally_flight_min, cfg.rally_flight_max);
    }
  };
  draw_launch();
  auto clears = [&]() { return net_clearance(p0, bx, by, t1, g) >= cfg.geometry.net_height_center; };

  // Volleyed shots are intercepted in the air past the net.
  double end_time = 0.0;
  bool no_bounce = false;
  if (want_no_bounce) {
    for (int attempt = 0; attempt < 50 && !clears(); ++attempt) draw_launch();
    if (clears()) {
      const Vector3d v{(bx - p0.x()) / t1, (by - p0.y()) / t1, (-p0.z() + 0.5 * g * t1 * t1) / t1};
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double t = std::floor(rng.uniform(0.6, 0.9) * t1 * cfg.sample_rate) / cfg.sample_rate;
        const double z = p0.z() + v.z() * t - 0.5 * g * t * t;
        const double y = p0.y() + v.y() * t;
        if (z >= 0.4 && y > 0.5) {
          end_time = t;
          no_bounce = true;
          break;
        }
      }
    }
  }
  rec.bounce_flag = no_bounce ? BounceFlag::no_bounce : BounceFlag::one_bounce;

  tr.launch_position = p0;
  tr.launch_velocity = {(bx - p0.x()) / t1, (by - p0.y()) / t1, (-p0.z() + 0.5 * g * t1 * t1) / t1};
  const Vector3d& v0 = tr.launch_velocity;
  double total;
  if (no_bounce) {
    tr.arc1_duration = end_time;
    tr.exit_duration = 0.0;
    tr.bounce_velocity.setZero();
    const Vector3d end = true_ball_position(cfg, tr, end_time);
    tr.bounce_x = end.x();
    tr.bounce_y = end.y();
    tr.good_position = {end.x(), end.y()};
    tr.good_time = end_time;
    total = end_time;
  } else {
    tr.arc1_duration = t1;
    tr.bounce_x = bx;
    tr.bounce_y = by;
    const double vz_in = v0.z() - g * t1;
    tr.bounce_velocity = {v0.x(), v0.y(), -cfg.restitution * vz_in};
    const double vz2 = tr.bounce_velocity.z();
    const double land = 2.0 * vz2 / g;
    const double disc = vz2 * vz2 - 2.0 * g;
    const double tg = disc >= 0 ? (vz2 - std::sqrt(disc)) / g : vz2 / g;
    // The recording stops on a sample, which fixes the observed exit duration.
    const double end = t1 + std::min(tg + rng.uniform(0.1, 0.4), 0.95 * land);
    tr.exit_duration = std::floor(end * cfg.sample_rate + 1e-9) / cfg.sample_rate - t1;
    tr.good_position = {bx + v0.x() * tg, by + v0.y() * tg};
    tr.good_time = t1 + tg;
    total = t1 + tr.exit_duration;
  }

  // Servers stand outside the ball so their side of the centre line is kept.
  const double hand_side = rec.shooter_meta.handedness == Handedness::right ? 1.0 : -1.0;
  const double offset = serve ? (p0.x() >= 0 ? 0.4 : -0.4) : 0.4 * hand_side;
  tr.shooter_start = {p0.x() + offset, p0.y() - 0.3};
  tr.shooter_velocity = cap_speed((Vector2d(0.0, -l - 0.5) - tr.shooter_start) * rng.uniform(0.5, 1.5), 4.0);

  // Net and bounce rules.
  const double tn = -p0.y() / v0.y();
  const double z_net = p0.z() + v0.z() * tn - 0.5 * g * tn * tn;
  tr.error = tn > tr.arc1_duration || z_net < cfg.geometry.net_height_center;
  if (!no_bounce && !tr.error) {
    if (serve) {
      const CourtRegion box = tr.shooter_start.x() >= 0 ? CourtRegion::deuce_service_box : CourtRegion::ad_service_box;
      tr.error = !in_bounds(bx, by, box, cfg.geometry);
    } else {
      tr.error = !(by >= 0 && in_bounds(bx, by, CourtRegion::singles_court, cfg.geometry));
    }
  }

  // Players.
  const Vector2d good = tr.good_position;
  switch (shot.archetype) {
    case Archetype::anticipator:
      tr.receiver_start = good + cfg.anticipator_spread * Vector2d(rng.normal(), rng.normal());
      tr.receiver_velocity = (good - tr.receiver_start) / tr.good_time;
      break;
    case Archetype::flat_footed:
      tr.receiver_start = {0.5 * rng.normal(), l + cfg.flat_footed_depth + 0.3 * rng.normal()};
      tr.receiver_velocity.setZero();
      break;
    case Archetype::average: {
      const Vector2d deep{0.0, l + 0.5 * cfg.flat_footed_depth};
      tr.receiver_start = 0.5 * (good + deep) + 0.5 * Vector2d(rng.normal(), rng.normal());
      tr.receiver_velocity = 0.5 * (good - tr.receiver_start) / tr.good_time;
      break;
    }
  }
  tr.receiver_velocity = cap_speed(tr.receiver_velocity, 11.0);

  // Outcome.
  shot.true_p = true_win_prob(cfg, shot);
  if (tr.error) rec.outcome = Outcome::error;
  else rec.outcome = rng.uniform() < shot.true_p ? Outcome::win : Outcome::in_play;

  // Sampled streams.
  tr.flipped = rng.uniform() < cfg.flip_fraction;
  const double sign = tr.flipped ? -1.0 : 1.0;
  const auto samples = static_cast<std::size_t>(std::floor(total * cfg.sample_rate + 1e-9)) + 1;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate;
    const Vector3d b = true_ball_position(cfg, tr, t);
    const Vector2d s = tr.shooter_start + tr.shooter_velocity * t;
    const Vector2d r = tr.receiver_start + tr.receiver_velocity * t;
    auto noise = [&]() { return cfg.noise_sd > 0 ? cfg.noise_sd * rng.normal() : 0.0; };
    const double bxn = b.x() + noise(), byn = b.y() + noise(), bzn = b.z() + noise();
    rec.ball.push_back({t, bxn, sign * byn, std::max(bzn, 0.0)});
    const double sxn = s.x() + noise(), syn = s.y() + noise();
    rec.shooter.push_back({t, sxn, sign * syn, 0.0});
    const double rxn = r.x() + noise(), ryn = r.y() + noise();
    rec.receiver.push_back({t, rxn, sign * ryn, 0.0});
  }
  return shot;
}

}  // namespace

std::vector<SynthShot> generate_corpus(const SynthConfig& config, std::size_t n, std::uint64_t seed) {
  config.validate();
  if (n < 1) throw InvalidArgument("corpus size must be at least 1");
  std::vector<SynthShot> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_one(config, seed, i));
  return out;
}

double true_win_prob(const SynthConfig& config, const SynthShot& shot) {
  const SynthTruth& tr = shot.truth;
  if (tr.error) return 0.0;
  const TruthRule& r = config.rule;
  const double required = (tr.good_position - tr.receiver_start).norm() / tr.good_time;
  const double eta = r.intercept + r.impact_speed * (tr.launch_velocity.norm() - 30.0) / 10.0 +
                     r.required_speed * required + r.abs_bounce_x * std::abs(tr.bounce_x) +
                     r.bounce_y * tr.bounce_y;
  return logistic(eta);
}

void write_truth_csv(std::ostream& out, const std::vector<SynthShot>& shots) {
  out << "shot_id,true_p,true_bounce_x,true_bounce_y,archetype\n";
  for (const auto& s : shots) {
    const double sign = s.truth.flipped ? -1.0 : 1.0;
    out << s.record.shot_id << ',' << format_double(s.true_p) << ',' << format_double(s.truth.bounce_x) << ','
        << format_double(sign * s.truth.bounce_y) << ',' << to_string(s.archetype) << '\n';
  }
}

}  // namespace shotvalue
