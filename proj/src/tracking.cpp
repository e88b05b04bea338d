#include "shotvalue/tracking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "shotvalue/error.hpp"
#include "text.hpp"

namespace shotvalue {

std::string_view to_string(Entity e) {
  switch (e) {
    case Entity::ball: return "ball";
    case Entity::shooter: return "shooter";
    case Entity::receiver: return "receiver";
  }
  return "?";
}

std::string_view to_string(ShotType t) {
  switch (t) {
    case ShotType::serve: return "serve";
    case ShotType::serve_return: return "serve_return";
    case ShotType::rally: return "rally";
  }
  return "?";
}

std::string_view to_string(BounceFlag f) {
  return f == BounceFlag::one_bounce ? "one_bounce" : "no_bounce";
}

std::string_view to_string(Handedness h) { return h == Handedness::left ? "left" : "right"; }

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::win: return "win";
    case Outcome::error: return "error";
    case Outcome::in_play: return "in_play";
  }
  return "?";
}

Entity parse_entity(std::string_view s) {
  if (s == "ball") return Entity::ball;
  if (s == "shooter") return Entity::shooter;
  if (s == "receiver") return Entity::receiver;
  throw ParseError("unknown entity '" + std::string(s) + "'");
}

ShotType parse_shot_type(std::string_view s) {
  if (s == "serve") return ShotType::serve;
  if (s == "serve_return") return ShotType::serve_return;
  if (s == "rally") return ShotType::rally;
  throw ParseError("unknown shot type '" + std::string(s) + "'");
}

BounceFlag parse_bounce_flag(std::string_view s) {
  if (s == "one_bounce") return BounceFlag::one_bounce;
  if (s == "no_bounce") return BounceFlag::no_bounce;
  throw ParseError("unknown bounce flag '" + std::string(s) + "'");
}

Handedness parse_handedness(std::string_view s) {
  if (s == "left") return Handedness::left;
  if (s == "right") return Handedness::right;
  throw ParseError("unknown handedness '" + std::string(s) + "'");
}

Outcome parse_outcome(std::string_view s) {
  if (s == "win") return Outcome::win;
  if (s == "error") return Outcome::error;
  if (s == "in_play") return Outcome::in_play;
  throw ParseError("unknown outcome '" + std::string(s) + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  s = detail::trim(s);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("not a number: '" + std::string(s) + "'", line);
  }
  return v;
}

void CourtGeometry::validate() const {
  if (!(court_half_length > 0 && singles_half_width > 0 && service_line_distance > 0 &&
        net_height_center > 0)) {
    throw InvalidArgument("court geometry values must be strictly positive");
  }
  if (!(service_line_distance < court_half_length)) {
    throw InvalidArgument("service line must lie inside the court half");
  }
}

bool set_geometry_value(CourtGeometry& g, std::string_view key, double value) {
  if (key == "court_half_length") g.court_half_length = value;
  else if (key == "singles_half_width") g.singles_half_width = value;
  else if (key == "service_line_distance") g.service_line_distance = value;
  else if (key == "net_height_center") g.net_height_center = value;
  else return false;
  return true;
}

CourtGeometry load_geometry(std::istream& in) {
  CourtGeometry g;
  std::size_t line_no = 0;
  for (const auto& [key, value, line] : detail::read_key_values(in, line_no)) {
    if (!set_geometry_value(g, key, parse_double(value, line))) {
      throw ParseError("unknown geometry key '" + key + "'", line);
    }
  }
  g.validate();
  return g;
}

CourtGeometry load_geometry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open geometry file " + path);
  return load_geometry(in);
}

namespace {

constexpr std::string_view kTrackingHeader[] = {"shot_id", "entity", "t", "x", "y", "z"};
constexpr std::string_view kMetadataHeader[] = {"shot_id",      "shot_type",     "shooter_id",
                                                "receiver_id",  "shooter_hand",  "receiver_hand",
                                                "outcome"};

template <std::size_t N>
void check_header(const std::vector<std::string_view>& fields, const std::string_view (&want)[N],
                  std::size_t line, const char* what) {
  bool ok = fields.size() == N;
  for (std::size_t i = 0; ok && i < N; ++i) ok = fields[i] == want[i];
  if (!ok) throw ParseError(std::string("unexpected ") + what + " header", line);
}

struct MetaRow {
  ShotType type;
  PlayerMeta shooter;
  PlayerMeta receiver;
  Outcome outcome;
};

}  // namespace

std::vector<ShotRecord> parse_tracking(std::istream& tracking, std::istream& metadata,
                                       const ParseOptions& options) {
  std::vector<ShotRecord> records;
  std::unordered_map<std::string, std::size_t> index;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(tracking, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    auto fields = detail::split_csv(line);
    if (!header_seen) {
      check_header(fields, kTrackingHeader, line_no, "tracking");
      header_seen = true;
      continue;
    }
    if (fields.size() != 6) throw ParseError("expected 6 columns", line_no);
    const std::string id(fields[0]);
    if (id.empty()) throw ParseError("empty shot_id", line_no);
    Entity entity;
    try {
      entity = parse_entity(fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    TrackingSample s;
    s.t = parse_double(fields[2], line_no);
    s.x = parse_double(fields[3], line_no);
    s.y = parse_double(fields[4], line_no);
    if (entity == Entity::ball) {
      s.z = parse_double(fields[5], line_no);
      if (s.z < -options.ground_tolerance) {
        throw ParseError("ball below ground in shot " + id, line_no);
      }
    } else if (!fields[5].empty()) {
      throw ParseError("z must be empty for players", line_no);
    }
    if (!std::isfinite(s.t) || !std::isfinite(s.x) || !std::isfinite(s.y) ||
        !std::isfinite(s.z)) {
      throw ParseError("non-finite value", line_no);
    }
    if (s.t < 0) throw ParseError("negative timestamp in shot " + id, line_no);

    auto [it, inserted] = index.try_emplace(id, records.size());
    if (inserted) {
      records.emplace_back();
      records.back().shot_id = id;
    }
    ShotRecord& rec = records[it->second];
    auto& stream = entity == Entity::ball      ? rec.ball
                   : entity == Entity::shooter ? rec.shooter
                                               : rec.receiver;
    if (!stream.empty() && !(s.t > stream.back().t)) {
      throw ParseError("timestamps not strictly increasing for " +
                           std::string(to_string(entity)) + " in shot " + id,
                       line_no);
    }
    stream.push_back(s);
  }

  std::unordered_map<std::string, MetaRow> meta;
  line_no = 0;
  header_seen = false;
  while (std::getline(metadata, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    auto fields = detail::split_csv(line);
    if (!header_seen) {
      check_header(fields, kMetadataHeader, line_no, "metadata");
      header_seen = true;
      continue;
    }
    if (fields.size() != 7) throw ParseError("expected 7 metadata columns", line_no);
    try {
      MetaRow row{parse_shot_type(fields[1]),
                  {std::string(fields[2]), parse_handedness(fields[4])},
                  {std::string(fields[3]), parse_handedness(fields[5])},
                  parse_outcome(fields[6])};
      if (!meta.emplace(std::string(fields[0]), std::move(row)).second) {
        throw ParseError("duplicate metadata for shot " + std::string(fields[0]));
      }
    } catch (const ParseError& e) {
      if (e.line() != 0) throw;
      throw ParseError(e.what(), line_no);
    }
    if (!index.count(std::string(fields[0]))) {
      throw ParseError("metadata for unknown shot " + std::string(fields[0]), line_no);
    }
  }

  for (auto& rec : records) {
    if (rec.ball.empty()) throw ParseError("missing ball stream in shot " + rec.shot_id);
    if (rec.shooter.empty()) throw ParseError("missing shooter stream in shot " + rec.shot_id);
    if (rec.receiver.empty()) throw ParseError("missing receiver stream in shot " + rec.shot_id);
    auto it = meta.find(rec.shot_id);
    if (it == meta.end()) throw ParseError("no metadata for shot " + rec.shot_id);
    rec.shot_type = it->second.type;
    rec.shooter_meta = it->second.shooter;
    rec.receiver_meta = it->second.receiver;
    rec.outcome = it->second.outcome;
    const bool touches_ground =
        std::any_of(rec.ball.begin(), rec.ball.end(),
                    [&](const TrackingSample& s) { return s.z <= options.bounce_threshold; });
    rec.bounce_flag = touches_ground ? BounceFlag::one_bounce : BounceFlag::no_bounce;
  }
  return records;
}

void write_tracking_csv(std::ostream& out, const std::vector<ShotRecord>& records) {
  out << "shot_id,entity,t,x,y,z\n";
  for (const auto& rec : records) {
    for (const auto& s : rec.ball) {
      out << rec.shot_id << ",ball," << format_double(s.t) << ',' << format_double(s.x) << ','
          << format_double(s.y) << ',' << format_double(s.z) << '\n';
    }
    for (const auto& s : rec.shooter) {
      out << rec.shot_id << ",shooter," << format_double(s.t) << ',' << format_double(s.x)
          << ',' << format_double(s.y) << ",\n";
    }
    for (const auto& s : rec.receiver) {
      out << rec.shot_id << ",receiver," << format_double(s.t) << ',' << format_double(s.x)
          << ',' << format_double(s.y) << ",\n";
    }
  }
}

void write_metadata_csv(std::ostream& out, const std::vector<ShotRecord>& records) {
  out << "shot_id,shot_type,shooter_id,receiver_id,shooter_hand,receiver_hand,outcome\n";
  for (const auto& rec : records) {
    out << rec.shot_id << ',' << to_string(rec.shot_type) << ',' << rec.shooter_meta.player_id
        << ',' << rec.receiver_meta.player_id << ',' << to_string(rec.shooter_meta.handedness)
        << ',' << to_string(rec.receiver_meta.handedness) << ',' << to_string(rec.outcome)
        << '\n';
  }
}

ShotRecord canonicalize(const ShotRecord& record) {
  if (record.shooter.empty()) throw InvalidArgument("shot " + record.shot_id + " has no shooter");
  const double y0 = record.shooter.front().y;
  if (std::abs(y0) < 1e-3) {
    throw InvalidArgument("ambiguous orientation: shooter on the net line in shot " +
                          record.shot_id);
  }
  if (y0 < 0) return record;
  ShotRecord out = record;
  for (auto* stream : {&out.ball, &out.shooter, &out.receiver}) {
    for (auto& s : *stream) s.y = -s.y;
  }
  return out;
}

bool in_bounds(double x, double y, CourtRegion region, const CourtGeometry& g) {
  switch (region) {
    case CourtRegion::singles_court:
      return std::abs(x) <= g.singles_half_width && std::abs(y) <= g.court_half_length;
    case CourtRegion::deuce_service_box:
      return x >= -g.singles_half_width && x <= 0.0 && y >= 0.0 &&
             y <= g.service_line_distance;
    case CourtRegion::ad_service_box:
      return x >= 0.0 && x <= g.singles_half_width && y >= 0.0 && y <= g.service_line_distance;
  }
  return false;
}

}  // namespace shotvalue
