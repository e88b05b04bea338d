#include "shotvalue/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shotvalue/error.hpp"

namespace shotvalue {

EncodingLayout::EncodingLayout(BounceFlag flag) : flag_(flag) {
  const char* axes = "xyz";
  for (int arc = 0; arc < arcs(); ++arc) {
    for (int a = 0; a < 3; ++a) {
      for (int p = 0; p < 4; ++p) {
        names_.push_back("arc" + std::to_string(arc + 1) + "_" + axes[a] + std::to_string(p));
      }
    }
  }
  duration_ = dim();
  names_.push_back(flag == BounceFlag::one_bounce ? "exit_duration" : "total_duration");
  shooter_ = dim();
  for (int a = 0; a < 2; ++a) {
    for (int p = 0; p < 2; ++p) names_.push_back(std::string("shooter_") + axes[a] + std::to_string(p));
  }
  receiver_ = dim();
  for (int a = 0; a < 2; ++a) {
    for (int p = 0; p < 2; ++p) names_.push_back(std::string("receiver_") + axes[a] + std::to_string(p));
  }
  for (int i = 0; i < receiver_; ++i) shooter_set_.push_back(i);
  for (int i = receiver_; i < dim(); ++i) receiver_set_.push_back(i);
  shot_iq_fixed_ = {shooter(Axis::x, 0), shooter(Axis::y, 0), receiver(Axis::x, 0),
                    receiver(Axis::y, 0)};
}

const EncodingLayout& EncodingLayout::for_flag(BounceFlag flag) {
  static const EncodingLayout one(BounceFlag::one_bounce);
  static const EncodingLayout none(BounceFlag::no_bounce);
  return flag == BounceFlag::one_bounce ? one : none;
}

std::optional<int> EncodingLayout::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

FunctionalEncoding::FunctionalEncoding(BounceFlag f, Eigen::VectorXd v)
    : flag(f), values(std::move(v)) {
  if (values.size() != layout().dim()) {
    throw InvalidArgument("encoding has " + std::to_string(values.size()) +
                          " values, layout expects " + std::to_string(layout().dim()));
  }
}

Cubic FunctionalEncoding::ball(int arc, Axis axis) const {
  if (arc >= layout().arcs()) throw InvalidArgument("arc 2 absent in a no-bounce encoding");
  Cubic p;
  for (int k = 0; k < 4; ++k) p.c[k] = values(layout().ball(arc, axis, k));
  return p;
}

Cubic FunctionalEncoding::shooter(Axis axis) const {
  Cubic p;
  p.c[0] = values(layout().shooter(axis, 0));
  p.c[1] = values(layout().shooter(axis, 1));
  return p;
}

Cubic FunctionalEncoding::receiver(Axis axis) const {
  Cubic p;
  p.c[0] = values(layout().receiver(axis, 0));
  p.c[1] = values(layout().receiver(axis, 1));
  return p;
}

BounceSplit detect_bounce(std::span<const TrackingSample> ball, double threshold) {
  std::size_t i = 0;
  while (i < ball.size() && !(ball[i].z <= threshold)) ++i;
  if (i == ball.size()) throw GeometryError("no bounce found");
  // Walk down to the bottom of this dip; later dips are ignored.
  while (i + 1 < ball.size() && ball[i + 1].z < ball[i].z) ++i;
  return {i, ball[i].t};
}

namespace {

struct ArcFit {
  std::array<PolynomialFit, 3> axes;
  double sse() const {
    double s = 0.0;
    for (const auto& f : axes) s += f.rmse * f.rmse * static_cast<double>(f.samples);
    return s;
  }
};

ArcFit fit_arc(std::span<const TrackingSample> samples, double t0) {
  std::vector<double> t, x, y, z;
  for (const auto& s : samples) {
    t.push_back(s.t - t0);
    x.push_back(s.x);
    y.push_back(s.y);
    z.push_back(s.z);
  }
  return {{fit_polynomial(t, x, 3), fit_polynomial(t, y, 3), fit_polynomial(t, z, 3)}};
}

std::array<PolynomialFit, 2> fit_player(std::span<const TrackingSample> samples,
                                        const std::string& who, double speed_cap) {
  std::vector<double> t, x, y;
  for (const auto& s : samples) {
    t.push_back(s.t);
    x.push_back(s.x);
    y.push_back(s.y);
  }
  std::array<PolynomialFit, 2> fits{fit_polynomial(t, x, 1), fit_polynomial(t, y, 1)};
  const double speed = std::hypot(fits[0].poly.c[1], fits[1].poly.c[1]);
  if (speed > speed_cap) {
    throw GeometryError(who + " segment implies " + std::to_string(speed) +
                        " m/s, above the cap");
  }
  return fits;
}

struct BounceCandidate {
  ArcFit arc1;
  ArcFit arc2;
  double bounce_time = 0.0;
  double sse() const { return arc1.sse() + arc2.sse(); }
};

BounceCandidate fit_two_arcs(std::span<const TrackingSample> ball, std::size_t arc1_end,
                             double horizon) {
  if (arc1_end < 4 || ball.size() - arc1_end < 4) {
    throw InvalidArgument("each arc needs at least 4 ball samples");
  }
  BounceCandidate c;
  c.arc1 = fit_arc(ball.first(arc1_end), 0.0);
  auto root = smallest_root_in(c.arc1.axes[2].poly, 0.0, horizon);
  if (!root) throw GeometryError("arc-1 z polynomial has no ground contact");
  c.bounce_time = *root;
  c.arc2 = fit_arc(ball.subspan(arc1_end), c.bounce_time);
  return c;
}

}  // namespace

EncodedShot encode(const ShotRecord& record, const TrajectoryConfig& config) {
  const auto& layout = EncodingLayout::for_flag(record.bounce_flag);
  std::span<const TrackingSample> ball(record.ball);
  if (!record.shooter.empty() && record.shooter.front().y > 0) {
    throw InvalidArgument("shot " + record.shot_id + " is not canonical");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(layout.dim());
  FitDiagnostics diag;

  auto store_arc = [&](int arc, const ArcFit& fit, std::array<double, 3>& rmse) {
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < 4; ++k) v(layout.ball(arc, static_cast<Axis>(a), k)) = fit.axes[a].poly.c[k];
      rmse[a] = fit.axes[a].rmse;
    }
  };

  if (record.bounce_flag == BounceFlag::one_bounce) {
    const BounceSplit split = detect_bounce(ball, config.bounce_threshold);
    // The lowest sample may sit on either side of the true contact; keep the
    // assignment with the smaller residual.
    std::optional<BounceCandidate> best;
    std::string failure;
    for (std::size_t end : {split.index + 1, split.index}) {
      try {
        BounceCandidate c = fit_two_arcs(ball, end, config.root_horizon);
        if (!best || c.sse() < best->sse()) {
          best = std::move(c);
          diag.arc1_samples = end;
          diag.arc2_samples = ball.size() - end;
        }
      } catch (const Error& e) {
        if (failure.empty()) failure = e.what();
      }
    }
    if (!best) throw GeometryError("shot " + record.shot_id + ": " + failure);
    store_arc(0, best->arc1, diag.arc1_rmse);
    store_arc(1, best->arc2, diag.arc2_rmse);
    diag.bounce_time = best->bounce_time;
    const double exit = ball.back().t - best->bounce_time;
    if (!(exit > 0)) throw GeometryError("shot " + record.shot_id + " ends before its bounce");
    v(layout.duration()) = exit;
  } else {
    if (ball.size() < 4) throw InvalidArgument("arc needs at least 4 ball samples");
    ArcFit fit = fit_arc(ball, 0.0);
    store_arc(0, fit, diag.arc1_rmse);
    diag.arc1_samples = ball.size();
    if (!(ball.back().t > 0)) throw InvalidArgument("shot " + record.shot_id + " has zero duration");
    v(layout.duration()) = ball.back().t;
  }

  auto shooter = fit_player(record.shooter, "shooter", config.player_speed_cap);
  auto receiver = fit_player(record.receiver, "receiver", config.player_speed_cap);
  for (int a = 0; a < 2; ++a) {
    for (int k = 0; k < 2; ++k) {
      v(layout.shooter(static_cast<Axis>(a), k)) = shooter[a].poly.c[k];
      v(layout.receiver(static_cast<Axis>(a), k)) = receiver[a].poly.c[k];
    }
    diag.shooter_rmse[a] = shooter[a].rmse;
    diag.receiver_rmse[a] = receiver[a].rmse;
  }
  diag.shooter_samples = record.shooter.size();
  diag.receiver_samples = record.receiver.size();
  return {FunctionalEncoding(record.bounce_flag, std::move(v)), diag};
}

BouncePoint bounce_location(const FunctionalEncoding& enc, double horizon) {
  if (enc.flag != BounceFlag::one_bounce) throw GeometryError("no-bounce encoding has no bounce");
  auto root = smallest_root_in(enc.ball(0, Axis::z), 0.0, horizon);
  if (!root) throw GeometryError("arc-1 z polynomial has no ground contact");
  return {enc.ball(0, Axis::x)(*root), enc.ball(0, Axis::y)(*root), *root};
}

double shot_duration(const FunctionalEncoding& enc, double horizon) {
  if (enc.flag == BounceFlag::one_bounce) {
    return bounce_location(enc, horizon).t + enc.duration_value();
  }
  return enc.duration_value();
}

ShotState evaluate(const FunctionalEncoding& enc, double t, double horizon) {
  const double end = shot_duration(enc, horizon);
  if (!(t >= 0.0 && t <= end)) {
    throw InvalidArgument("time " + std::to_string(t) + " outside [0, " + std::to_string(end) + "]");
  }
  int arc = 0;
  double local = t;
  if (enc.flag == BounceFlag::one_bounce) {
    const double t1 = bounce_location(enc, horizon).t;
    if (t > t1) {
      arc = 1;
      local = t - t1;
    }
  }
  ShotState s;
  for (int a = 0; a < 3; ++a) s.ball(a) = enc.ball(arc, static_cast<Axis>(a))(local);
  s.shooter = {enc.shooter(Axis::x)(t), enc.shooter(Axis::y)(t)};
  s.receiver = {enc.receiver(Axis::x)(t), enc.receiver(Axis::y)(t)};
  return s;
}

}  // namespace shotvalue
