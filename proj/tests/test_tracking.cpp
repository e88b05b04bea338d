#include <cmath>
#include <sstream>

#include <doctest.h>

#include "shotvalue/error.hpp"
#include "shotvalue/tracking.hpp"

using namespace shotvalue;

namespace {

const char* kTrackingHeader = "shot_id,entity,t,x,y,z\n";
const char* kMetaHeader = "shot_id,shot_type,shooter_id,receiver_id,shooter_hand,receiver_hand,outcome\n";

ShotRecord sample_record(const std::string& id, double sign) {
  ShotRecord r;
  r.shot_id = id;
  r.shot_type = ShotType::serve_return;
  r.bounce_flag = BounceFlag::one_bounce;
  for (int k = 0; k < 12; ++k) {
    const double t = 0.05 * k;
    r.ball.push_back({t, 0.1 + 1.5 * t, sign * (-11.0 + 30.0 * t), std::abs(1.0 - 4.0 * t) + 0.013 * k});
    r.shooter.push_back({t, -0.5 + 0.3 * t, sign * (-12.0 + t), 0.0});
    r.receiver.push_back({t, 1.0 - t, sign * (12.0 - 0.2 * t), 0.0});
  }
  r.shooter_meta = {"p1", Handedness::left};
  r.receiver_meta = {"p2", Handedness::right};
  r.outcome = Outcome::win;
  return r;
}

std::vector<ShotRecord> round_trip(const std::vector<ShotRecord>& records) {
  std::stringstream tracking, meta;
  write_tracking_csv(tracking, records);
  write_metadata_csv(meta, records);
  return parse_tracking(tracking, meta);
}

}  // namespace

TEST_CASE("empty input parses to no records") {
  std::istringstream empty_t(""), empty_m("");
  CHECK(parse_tracking(empty_t, empty_m).empty());
  std::istringstream head_t(kTrackingHeader), head_m(kMetaHeader);
  CHECK(parse_tracking(head_t, head_m).empty());
}

TEST_CASE("serialization round trip") {
  std::vector<ShotRecord> records{sample_record("a", 1.0), sample_record("b", -1.0)};
  records[1].bounce_flag = BounceFlag::one_bounce;
  records[1].outcome = Outcome::error;
  auto parsed = round_trip(records);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0] == records[0]);
  CHECK(parsed[1] == records[1]);
  CHECK(round_trip(parsed) == parsed);
}

TEST_CASE("bounce flag is inferred from ball height") {
  ShotRecord r = sample_record("v", 1.0);
  for (auto& s : r.ball) s.z = 1.0 + s.t;
  r.bounce_flag = BounceFlag::no_bounce;
  auto parsed = round_trip({r});
  CHECK(parsed[0].bounce_flag == BounceFlag::no_bounce);
}

TEST_CASE("parse errors") {
  auto parse = [](const std::string& t, const std::string& m) {
    std::istringstream ts(kTrackingHeader + t), ms(kMetaHeader + m);
    return parse_tracking(ts, ms);
  };
  const std::string meta = "s1,rally,p1,p2,right,left,in_play\n";
  const std::string players = "s1,shooter,0,0,-10,\ns1,receiver,0,0,10,\n";
  SUBCASE("decreasing ball timestamps name the shot") {
    CHECK_THROWS_WITH_AS(parse("s1,ball,0.1,0,0,1\ns1,ball,0.05,0,0,1\n" + players, meta),
                         doctest::Contains("s1"), ParseError);
  }
  SUBCASE("malformed row reports its line") {
    try {
      parse("s1,ball,0.1,0,0,1\ns1,ball,abc,0,0,1\n", meta);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("missing ball stream") {
    CHECK_THROWS_WITH_AS(parse(players, meta), doctest::Contains("ball"), ParseError);
  }
  SUBCASE("player z must be empty") {
    CHECK_THROWS_AS(parse("s1,ball,0,0,0,1\ns1,shooter,0,0,-10,1\ns1,receiver,0,0,10,\n", meta), ParseError);
  }
  SUBCASE("unknown entity") {
    CHECK_THROWS_AS(parse("s1,umpire,0,0,0,\n", meta), ParseError);
  }
  SUBCASE("missing metadata") {
    CHECK_THROWS_AS(parse("s1,ball,0,0,0,1\n" + players, ""), ParseError);
  }
  SUBCASE("ball below ground") {
    CHECK_THROWS_AS(parse("s1,ball,0,0,0,-1\n" + players, meta), ParseError);
  }
}

TEST_CASE("canonicalization") {
  ShotRecord canonical = sample_record("c", 1.0);
  CHECK(canonicalize(canonical) == canonical);
  ShotRecord flipped = sample_record("f", -1.0);
  ShotRecord c = canonicalize(flipped);
  CHECK(canonicalize(c) == c);
  for (std::size_t k = 0; k < flipped.ball.size(); ++k) {
    CHECK(c.ball[k].y == -flipped.ball[k].y);
    CHECK(c.ball[k].x == flipped.ball[k].x);
    CHECK(c.ball[k].z == flipped.ball[k].z);
    CHECK(c.shooter[k].y == -flipped.shooter[k].y);
    CHECK(c.receiver[k].y == -flipped.receiver[k].y);
    // Distances between entities are preserved.
    auto dist = [](const TrackingSample& a, const TrackingSample& b) {
      return std::hypot(a.x - b.x, a.y - b.y);
    };
    CHECK(dist(c.ball[k], c.receiver[k]) == doctest::Approx(dist(flipped.ball[k], flipped.receiver[k])));
    CHECK(dist(c.ball[k], c.shooter[k]) == doctest::Approx(dist(flipped.ball[k], flipped.shooter[k])));
  }
  ShotRecord straddle = canonical;
  straddle.shooter.front().y = 0.0;
  CHECK_THROWS_WITH_AS(canonicalize(straddle), doctest::Contains("ambiguous"), InvalidArgument);
}

TEST_CASE("court regions") {
  CourtGeometry g;
  CHECK(in_bounds(0.0, 0.1, CourtRegion::singles_court, g));
  CHECK_FALSE(in_bounds(g.singles_half_width + 1e-9, 5.0, CourtRegion::singles_court, g));
  CHECK(in_bounds(g.singles_half_width, g.court_half_length, CourtRegion::singles_court, g));
  CHECK(in_bounds(-1.0, 3.0, CourtRegion::deuce_service_box, g));
  CHECK_FALSE(in_bounds(1.0, 3.0, CourtRegion::deuce_service_box, g));
  CHECK(in_bounds(1.0, 3.0, CourtRegion::ad_service_box, g));
  CHECK(in_bounds(0.0, g.service_line_distance, CourtRegion::ad_service_box, g));
  CHECK_FALSE(in_bounds(1.0, g.service_line_distance + 0.01, CourtRegion::ad_service_box, g));
  // Service boxes lie inside the singles court.
  for (double x = -5; x <= 5; x += 0.25) {
    for (double y = -1; y <= 8; y += 0.25) {
      if (in_bounds(x, y, CourtRegion::deuce_service_box, g) || in_bounds(x, y, CourtRegion::ad_service_box, g)) {
        CHECK(in_bounds(x, y, CourtRegion::singles_court, g));
      }
    }
  }
}

TEST_CASE("geometry configuration") {
  std::istringstream in("# regulation-ish\ncourt_half_length = 10\nsingles_half_width=4\n\nservice_line_distance = 5\n");
  CourtGeometry g = load_geometry(in);
  CHECK(g.court_half_length == 10.0);
  CHECK(g.singles_half_width == 4.0);
  CHECK(g.service_line_distance == 5.0);
  CHECK(g.net_height_center == CourtGeometry{}.net_height_center);
  std::istringstream bad("court_length = 10\n");
  CHECK_THROWS_AS(load_geometry(bad), ParseError);
  std::istringstream inverted("service_line_distance = 12\n");
  CHECK_THROWS_AS(load_geometry(inverted), InvalidArgument);
  CHECK_THROWS_AS(load_geometry_file("/nonexistent/geometry.cfg"), IoError);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, -1.0 / 3.0, 1e-17, 123456.789, 0.0}) CHECK(parse_double(format_double(v)) == v);
  CHECK_THROWS_AS(parse_double("1.0x"), ParseError);
}
