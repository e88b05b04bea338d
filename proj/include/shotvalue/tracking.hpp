#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shotvalue {

enum class Entity { ball, shooter, receiver };
enum class ShotType { serve, serve_return, rally };
enum class BounceFlag { one_bounce, no_bounce };
enum class Handedness { left, right };
enum class Outcome { win, error, in_play };
enum class CourtRegion { singles_court, deuce_service_box, ad_service_box };

std::string_view to_string(Entity e);
std::string_view to_string(ShotType t);
std::string_view to_string(BounceFlag f);
std::string_view to_string(Handedness h);
std::string_view to_string(Outcome o);

// Parsers throw ParseError on unknown names.
Entity parse_entity(std::string_view s);
ShotType parse_shot_type(std::string_view s);
BounceFlag parse_bounce_flag(std::string_view s);
Handedness parse_handedness(std::string_view s);
Outcome parse_outcome(std::string_view s);

// One positional sample. t is seconds since the racquet impact that starts
// the shot; z is only meaningful for the ball.
struct TrackingSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const TrackingSample&) const = default;
};

struct PlayerMeta {
  std::string player_id;
  Handedness handedness = Handedness::right;

  bool operator==(const PlayerMeta&) const = default;
};

struct ShotRecord {
  std::string shot_id;
  ShotType shot_type = ShotType::rally;
  BounceFlag bounce_flag = BounceFlag::one_bounce;
  std::vector<TrackingSample> ball;
  std::vector<TrackingSample> shooter;
  std::vector<TrackingSample> receiver;
  PlayerMeta shooter_meta;
  PlayerMeta receiver_meta;
  Outcome outcome = Outcome::in_play;

  bool operator==(const ShotRecord&) const = default;
};

// Court frame: origin at the centre of the net, net plane at y = 0, z up.
// Defaults are regulation singles dimensions in meters.
struct CourtGeometry {
  double court_half_length = 11.885;
  double singles_half_width = 4.115;
  double service_line_distance = 6.40;
  double net_height_center = 0.914;

  void validate() const;
};

// Flat "key = value" file; unknown keys are rejected.
CourtGeometry load_geometry(std::istream& in);
CourtGeometry load_geometry_file(const std::string& path);
// Applies a single key; returns false when the key is not a geometry key.
bool set_geometry_value(CourtGeometry& g, std::string_view key, double value);

struct ParseOptions {
  // Ball samples at or below this height mark the shot as one_bounce.
  double bounce_threshold = 0.15;
  // Tolerated negative ball height.
  double ground_tolerance = 0.05;
};

// Reads the tracking CSV (shot_id, entity, t, x, y, z) and the shot metadata
// CSV (shot_id, shot_type, shooter_id, receiver_id, shooter_hand,
// receiver_hand, outcome). Records come back in order of first appearance in
// the tracking stream. Lines starting with '#' are skipped.
std::vector<ShotRecord> parse_tracking(std::istream& tracking, std::istream& metadata,
                                       const ParseOptions& options = {});

void write_tracking_csv(std::ostream& out, const std::vector<ShotRecord>& records);
void write_metadata_csv(std::ostream& out, const std::vector<ShotRecord>& records);

// Reflects y so that the shooter hits toward +y. Idempotent.
ShotRecord canonicalize(const ShotRecord& record);

// Closed regions; points on a line are in. Service boxes are on the +y half,
// deuce on the receiver's right (x <= 0).
bool in_bounds(double x, double y, CourtRegion region, const CourtGeometry& geometry);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, std::size_t line = 0);

}  // namespace shotvalue
